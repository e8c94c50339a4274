#ifndef NCOPT_DOSIMETRY_HPP
#define NCOPT_DOSIMETRY_HPP

#include <cstdint>
#include <string>

namespace ncopt {

/// Drug payload carried by the nanoparticles.
struct DrugModel {
    double molar_mass_g_mol = 543.52;  // doxorubicin
    double potency_ic90_mol_l = 1e-5;  // IC90, 10 uM
    std::string name = "doxorubicin";
};

/// Idealised murine host and tumour geometry.
struct HostModel {
    double weight_g = 20.0;
    double pid_fraction = 0.01;          // fraction of injected dose reaching the tumour
    double tumour_volume_mm3 = 125.0;
    double circulation_time_s = 48.0 * 3600.0;
    double cell_length_m = 10e-6;
    double receptors_per_cell = 1e5;
};

/// Evolvable nanoparticle parameters plus fixed kinetics.
struct NanoparticleDesign {
    double diffusion_cm2_s = 1e-6;          // D
    double binding_rate_per_molar_s = 1e5;  // k_a
    double dissoc_rate_per_s = 1e-4;        // k_d
    double internal_rate_per_s = 1e-5;      // k_i
    double extravasated_count = 1e5;        // NP0, particles entering the column over circulation
    double payload_count = 1e3;             // E, drug molecules per particle
};

/// 1-D column the extravasated particles are assumed to fill.
struct PenetrationGeometry {
    double compartment_length_m = 10e-6;
    int n_cells = 22;

    double total_depth_m() const { return n_cells * compartment_length_m; }
};

namespace dosimetry {

/// Injected dose [mg drug / kg body mass] implied by the particle count
/// entering the column and the payload per particle.
double injected_dose(const NanoparticleDesign& design, const DrugModel& drug,
                     const HostModel& host, const PenetrationGeometry& geom);

/// Inverse of injected_dose: particle count NP0 implied by a dose in mg/kg.
double extravasated_count(double dose_mg_kg, double payload_count,
                          const DrugModel& drug, const HostModel& host,
                          const PenetrationGeometry& geom);

/// Internalised particles required to deliver the IC90 payload to one cell.
std::int64_t lethal_threshold(double payload_count, const DrugModel& drug,
                              double cell_length_m);

/// Report-only particle radius [nm] from the diffusion coefficient [cm^2/s],
/// calibrated so D = 1e-6 cm^2/s corresponds to r = 2.5 nm.
double radius_from_diffusion(double diffusion_cm2_s);

/// Equilibrium dissociation constant k_d / k_a in nM.
double dissociation_constant_nM(double binding_rate_per_molar_s,
                                double dissoc_rate_per_s);

} // namespace dosimetry
} // namespace ncopt

#endif
