#ifndef NCOPT_TUMOUR_HPP
#define NCOPT_TUMOUR_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ncopt/rng.hpp"

namespace ncopt {

enum class AgentType { CC, CSC, VP, Necrotic };

const char* to_string(AgentType t);
AgentType agent_type_from_string(const std::string& s);

struct Agent {
    std::int64_t id = 0;
    AgentType kind = AgentType::CC;
    int x = 0, y = 0, z = 0;
    bool dormant = false;                 // CSC only
    std::array<int, 3> direction{1, 0, 0}; // VP only, growth direction
    bool vp_tip = false;                  // VP only, actively extending end
};

struct TumourConfig {
    int nx = 80, ny = 80, nz = 80;
    double dediff_prob = 0.005;          // CC division yields CC+CSC
    double csc_asym_prob = 0.99;         // CSC division is CSC+CC
    double csc_sym_two_csc_prob = 0.99;  // symmetric CSC division yields 2 CSC
    // Empty means: seed vessels two voxels from the lattice centre on each
    // of the 6 axes, growing outward.
    std::vector<std::array<int, 3>> vp_initial_positions;
    std::vector<std::array<int, 3>> vp_initial_directions;
    int vp_max_count = 20000;
    double vp_branch_freq = 0.02;        // per extension
    double o2_secretion = 1.5;           // source term at VP voxels
    double o2_decay = 0.005;             // background, 1/step
    double o2_cell_uptake = 0.5;         // extra decay in voxels holding a live cell
    double o2_diffusion = 1.0;           // voxel^2/step
    double o2_prolif_threshold = 0.010;
    double o2_necrosis_threshold = 0.002;
    double division_prob_per_step = 0.3;
    std::int64_t target_cell_count = 50000;
    std::uint64_t seed = 1;
    bool spawn_csc = true;               // heterogeneous tumour; false disables dedifferentiation
};

struct TumourSnapshot {
    std::int64_t step = 0;
    int nx = 0, ny = 0, nz = 0;
    std::vector<Agent> agents;
    std::vector<double> oxygen; // row-major x + nx*(y + ny*z); may be empty
    bool stalled = false;
};

/// Outcome of one division event: (parent type after division, daughter type).
std::pair<AgentType, AgentType> sample_division(AgentType parent,
                                                const TumourConfig& cfg, Rng& rng);

class TumourState {
public:
    explicit TumourState(const TumourConfig& cfg);

    void step();
    /// Runs until live CC+CSC count >= target or growth stalls.
    TumourSnapshot grow_until(std::int64_t target_cell_count);
    TumourSnapshot snapshot() const;

    std::int64_t live_cell_count() const;
    std::int64_t step_count() const { return step_; }
    bool stalled() const { return stalled_; }
    const TumourConfig& config() const { return cfg_; }
    double oxygen_at(int x, int y, int z) const;

private:
    int idx(int x, int y, int z) const { return x + cfg_.nx * (y + cfg_.ny * z); }
    bool in_lattice(int x, int y, int z) const;
    void relax_oxygen(int sweeps);
    void extend_vessels();

    TumourConfig cfg_;
    std::vector<std::int32_t> grid_;   // agent index per voxel, -1 empty
    std::vector<Agent> agents_;
    std::vector<double> oxygen_, oxygen_scratch_;
    std::vector<std::int32_t> vp_sources_; // voxel indices with secretion
    Rng rng_;
    std::int64_t step_ = 0;
    std::int64_t next_id_ = 0;
    std::int64_t vp_count_ = 0;
    bool stalled_ = false;
    // Bounding box of occupied voxels, grown by a halo for oxygen sweeps.
    int lo_[3], hi_[3];
};

std::map<AgentType, std::int64_t> type_counts(const TumourSnapshot& snap);

/// Text snapshot format: header "step=<n> dims=<x>,<y>,<z>", then one agent
/// per line "id,kind,x,y,z,dormant" with kind in {CC,CSC,VP,NEC}.
void write_snapshot(std::ostream& out, const TumourSnapshot& snap);
TumourSnapshot read_snapshot(std::istream& in);
void write_snapshot_file(const std::string& path, const TumourSnapshot& snap);
TumourSnapshot read_snapshot_file(const std::string& path);

/// Oxygen sidecar: row-major ASCII floats, one z-slice per line block.
void write_oxygen_file(const std::string& path, const TumourSnapshot& snap);

} // namespace ncopt

#endif
