#ifndef NCOPT_SCENARIO_HPP
#define NCOPT_SCENARIO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ncopt/tumour.hpp"

namespace ncopt {

enum class CompartmentKind { VP, CC, CSC, ECM };

char compartment_token(CompartmentKind k);
CompartmentKind compartment_from_token(char c);

/// 1-D chain of compartments; index 0 is the source vessel point.
struct Scenario {
    std::string id;
    std::vector<CompartmentKind> compartments;
    double length_per_compartment_m = 10e-6;

    int n_cells() const;       // CC + CSC
    int n_cc() const;
    int n_csc() const;
};

struct DepthStats {
    std::vector<double> distances_um; // per live cell, min distance to any VP
    double p95_um = 0.0;              // nearest-rank 95th percentile
    int depth_cells = 0;              // ceil(p95 / 10 um)
};

namespace scenario {

/// Nearest-rank percentile: the ceil(q*n)-th order statistic (1-based).
double nearest_rank_percentile(std::vector<double> values, double q);

DepthStats depth_stats(const TumourSnapshot& snapshot);

std::vector<Scenario> extract_scenarios(const TumourSnapshot& snapshot, int n,
                                        int depth_cells, std::uint64_t rng_seed);

Scenario worst_case_homogeneous();
Scenario worst_case_heterogeneous();

/// One scenario per line: id then single-letter tokens, space separated,
/// V=VP, C=CC, S=CSC, E=ECM.
void write_scenarios(std::ostream& out, const std::vector<Scenario>& scenarios);
std::vector<Scenario> read_scenarios(std::istream& in);
void write_scenario_file(const std::string& path, const std::vector<Scenario>& scenarios);
std::vector<Scenario> read_scenario_file(const std::string& path);

} // namespace scenario
} // namespace ncopt

#endif
