#ifndef NCOPT_CONFIG_HPP
#define NCOPT_CONFIG_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "ncopt/dosimetry.hpp"
#include "ncopt/evolve.hpp"
#include "ncopt/tumour.hpp"

namespace ncopt {

/// Whole-pipeline configuration.  Every field has a default; an empty config
/// file runs the homogeneous worst-case optimization end to end.
struct PipelineConfig {
    std::uint64_t master_seed = 1;
    std::string out_dir = "out";

    TumourConfig tumour;
    HostModel host;
    DrugModel drug;
    PenetrationGeometry geometry;

    int scenario_n = 100;
    int scenario_depth = 22; // <= 0 means auto (ceil(p95 / 10 um))

    enum class Backend { Ssa, Tau };
    Backend tissue_backend = Backend::Tau;
    double tau_epsilon = 0.03;
    double trajectory_interval_s = 600.0;

    EvolveConfig evolve;
    bool heterogeneous = false;
};

namespace config {

/// Flat sectioned key=value text: "[section]" headers, "#" comments.
std::map<std::string, std::string> parse_kv(std::istream& in);

PipelineConfig load(std::istream& in);
PipelineConfig load_file(const std::string& path);
PipelineConfig defaults();

/// Echo with every resolved value; reloading the echo reproduces the config.
void write(std::ostream& out, const PipelineConfig& cfg);

} // namespace config
} // namespace ncopt

#endif
