#ifndef NCOPT_TISSUE_HPP
#define NCOPT_TISSUE_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ncopt/dosimetry.hpp"
#include "ncopt/scenario.hpp"

namespace ncopt {

/// Reaction network over one scenario chain, fully parameterised.
/// Species index 0 kills CCs; species index 1 (when present) kills CSCs.
struct TissueSystem {
    Scenario scenario;
    std::vector<NanoparticleDesign> designs;
    std::vector<std::int64_t> lethal_thresholds; // per species
    std::vector<double> release_rate;            // per species, per VP compartment [1/s]
    std::vector<double> hop_rate;                // per species, D/L^2 [1/s]
    std::vector<double> bind_rate;               // per species, k_a/(N_A V_c) [1/s per pair]
    std::vector<double> unbind_rate;             // per species, k_d [1/s]
    std::vector<double> internal_rate;           // per species, k_i [1/s]
    double receptors_per_cell = 1e5;
    double t_end_s = 48.0 * 3600.0;

    int n_species() const { return static_cast<int>(designs.size()); }
    int n_compartments() const { return static_cast<int>(scenario.compartments.size()); }
    bool is_cell(int c) const {
        const CompartmentKind k = scenario.compartments[c];
        return k == CompartmentKind::CC || k == CompartmentKind::CSC;
    }
};

struct TissueState {
    double clock_s = 0.0;
    // [species][compartment]
    std::vector<std::vector<std::int64_t>> free_np;
    std::vector<std::vector<std::int64_t>> complexes;
    std::vector<std::vector<std::int64_t>> internalized;
    std::vector<std::int64_t> receptors;     // per compartment
    std::vector<char> alive;                 // per compartment; cells only
    std::vector<double> death_time_s;        // <0 while alive
    std::vector<std::int64_t> injected_total; // per species
};

struct TreatmentOutcome {
    std::int64_t cc_total = 0, cc_killed = 0;
    std::int64_t csc_total = 0, csc_killed = 0;
    std::vector<std::vector<std::int64_t>> final_internalized; // [species][compartment]
    std::vector<std::int64_t> injected_total;                  // per species

    double cc_fraction() const;  // 0/0 -> 1
    double csc_fraction() const; // 0/0 -> 1
};

/// Row of the optional trajectory dump, one per (time, compartment, species).
struct TrajectorySample {
    double t_s;
    int compartment;
    int species;
    std::int64_t free_np, receptors, complexes, internalized;
    bool alive;
};

struct TrajectoryOptions {
    double interval_s = 600.0;
};

TissueSystem build_system(const Scenario& scenario,
                          const std::vector<NanoparticleDesign>& designs,
                          const DrugModel& drug, const HostModel& host);

std::pair<TissueState, TreatmentOutcome>
simulate_ssa(const TissueSystem& system, std::uint64_t seed,
             std::vector<TrajectorySample>* trajectory = nullptr,
             const TrajectoryOptions& traj_opts = {});

std::pair<TissueState, TreatmentOutcome>
simulate_tau(const TissueSystem& system, std::uint64_t seed, double epsilon = 0.03,
             std::vector<TrajectorySample>* trajectory = nullptr,
             const TrajectoryOptions& traj_opts = {});

TreatmentOutcome outcome_metrics(const TissueState& state, const TissueSystem& system);

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectorySample>& rows);

} // namespace ncopt

#endif
