#include "ncopt/dosimetry.hpp"

#include <cmath>
#include <stdexcept>

#include "ncopt/units.hpp"

namespace ncopt::dosimetry {

namespace {

void check_positive(double v, const char* what) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be positive");
}

// Dose per (particle * payload molecule), in mg/kg.  Everything is reduced
// to SI internally; mg/kg equals 1e-6 g drug per g body mass.
double dose_per_particle_payload(const DrugModel& drug, const HostModel& host,
                                 const PenetrationGeometry& geom) {
    check_positive(drug.molar_mass_g_mol, "molar_mass");
    check_positive(host.weight_g, "weight");
    check_positive(host.pid_fraction, "pid_fraction");
    check_positive(host.tumour_volume_mm3, "tumour_volume");
    check_positive(geom.compartment_length_m, "compartment_length");
    if (geom.n_cells < 1) throw std::invalid_argument("n_cells must be >= 1");
    if (host.pid_fraction > 1.0) throw std::invalid_argument("pid_fraction must be <= 1");

    const double s = geom.compartment_length_m;
    const double column_m3 = s * s * geom.total_depth_m();
    const double tumour_m3 = host.tumour_volume_mm3 * 1e-9;
    const double grams_per_molecule = drug.molar_mass_g_mol / kAvogadro;
    // g drug per g host, scaled from the column to the whole tumour and
    // back through the fraction that ever reaches it.
    const double g_per_g = grams_per_molecule * tumour_m3 /
                           (host.weight_g * host.pid_fraction * column_m3);
    return g_per_g * 1e6; // g/g -> mg/kg
}

} // namespace

double injected_dose(const NanoparticleDesign& design, const DrugModel& drug,
                     const HostModel& host, const PenetrationGeometry& geom) {
    if (design.extravasated_count < 0.0) throw std::invalid_argument("NP0 must be >= 0");
    check_positive(design.payload_count, "payload_count");
    return design.extravasated_count * design.payload_count *
           dose_per_particle_payload(drug, host, geom);
}

double extravasated_count(double dose_mg_kg, double payload_count,
                          const DrugModel& drug, const HostModel& host,
                          const PenetrationGeometry& geom) {
    if (dose_mg_kg < 0.0) throw std::invalid_argument("dose must be >= 0");
    check_positive(payload_count, "payload_count");
    return dose_mg_kg / (payload_count * dose_per_particle_payload(drug, host, geom));
}

std::int64_t lethal_threshold(double payload_count, const DrugModel& drug,
                              double cell_length_m) {
    check_positive(payload_count, "payload_count");
    check_positive(cell_length_m, "cell_length");
    const double cell_volume_l = cell_length_m * cell_length_m * cell_length_m * kLitrePerM3;
    const double lethal_molecules = drug.potency_ic90_mol_l * cell_volume_l * kAvogadro;
    return static_cast<std::int64_t>(std::llround(lethal_molecules / payload_count));
}

double radius_from_diffusion(double diffusion_cm2_s) {
    check_positive(diffusion_cm2_s, "diffusion");
    constexpr double kStokesEinsteinCalib = 2.5e-6; // nm * cm^2/s
    return kStokesEinsteinCalib / diffusion_cm2_s;
}

double dissociation_constant_nM(double binding_rate_per_molar_s,
                                double dissoc_rate_per_s) {
    check_positive(binding_rate_per_molar_s, "binding_rate");
    if (dissoc_rate_per_s < 0.0) throw std::invalid_argument("dissoc_rate must be >= 0");
    return dissoc_rate_per_s / binding_rate_per_molar_s * 1e9;
}

} // namespace ncopt::dosimetry
