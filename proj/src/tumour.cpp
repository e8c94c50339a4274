#include "ncopt/tumour.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ncopt {

namespace {

constexpr std::array<std::array<int, 3>, 6> kFaceNeighbours{{
    {{1, 0, 0}}, {{-1, 0, 0}}, {{0, 1, 0}}, {{0, -1, 0}}, {{0, 0, 1}}, {{0, 0, -1}},
}};

bool is_live_cell(AgentType t) { return t == AgentType::CC || t == AgentType::CSC; }

} // namespace

const char* to_string(AgentType t) {
    switch (t) {
        case AgentType::CC: return "CC";
        case AgentType::CSC: return "CSC";
        case AgentType::VP: return "VP";
        case AgentType::Necrotic: return "NEC";
    }
    return "?";
}

AgentType agent_type_from_string(const std::string& s) {
    if (s == "CC") return AgentType::CC;
    if (s == "CSC") return AgentType::CSC;
    if (s == "VP") return AgentType::VP;
    if (s == "NEC") return AgentType::Necrotic;
    throw std::invalid_argument("unknown agent type: " + s);
}

std::pair<AgentType, AgentType> sample_division(AgentType parent,
                                                const TumourConfig& cfg, Rng& rng) {
    const double u = uniform01(rng);
    if (parent == AgentType::CC) {
        if (cfg.spawn_csc && u < cfg.dediff_prob)
            return {AgentType::CC, AgentType::CSC};
        return {AgentType::CC, AgentType::CC};
    }
    if (parent == AgentType::CSC) {
        if (u < cfg.csc_asym_prob) return {AgentType::CSC, AgentType::CC};
        if (uniform01(rng) < cfg.csc_sym_two_csc_prob)
            return {AgentType::CSC, AgentType::CSC};
        return {AgentType::CC, AgentType::CC};
    }
    throw std::invalid_argument("only CC and CSC agents divide");
}

TumourState::TumourState(const TumourConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    if (cfg_.nx < 3 || cfg_.ny < 3 || cfg_.nz < 3)
        throw std::invalid_argument("lattice too small");
    for (double p : {cfg_.dediff_prob, cfg_.csc_asym_prob, cfg_.csc_sym_two_csc_prob,
                     cfg_.vp_branch_freq, cfg_.division_prob_per_step}) {
        if (p < 0.0 || p > 1.0) throw std::invalid_argument("probability out of [0,1]");
    }
    if (!(cfg_.o2_necrosis_threshold < cfg_.o2_prolif_threshold))
        throw std::invalid_argument("o2_necrosis_threshold must be < o2_prolif_threshold");
    if (cfg_.target_cell_count < 1)
        throw std::invalid_argument("target_cell_count must be >= 1");

    const std::size_t n = static_cast<std::size_t>(cfg_.nx) * cfg_.ny * cfg_.nz;
    grid_.assign(n, -1);
    oxygen_.assign(n, 0.0);
    oxygen_scratch_.assign(n, 0.0);

    const int cx = cfg_.nx / 2, cy = cfg_.ny / 2, cz = cfg_.nz / 2;
    lo_[0] = hi_[0] = cx; lo_[1] = hi_[1] = cy; lo_[2] = hi_[2] = cz;

    auto place = [&](AgentType kind, int x, int y, int z,
                     std::array<int, 3> dir) -> Agent& {
        if (!in_lattice(x, y, z))
            throw std::invalid_argument("initial position outside lattice");
        if (grid_[idx(x, y, z)] != -1)
            throw std::invalid_argument("overlapping initial positions");
        Agent a;
        a.id = next_id_++;
        a.kind = kind;
        a.x = x; a.y = y; a.z = z;
        a.direction = dir;
        a.vp_tip = (kind == AgentType::VP);
        grid_[idx(x, y, z)] = static_cast<std::int32_t>(agents_.size());
        agents_.push_back(a);
        lo_[0] = std::min(lo_[0], x); hi_[0] = std::max(hi_[0], x);
        lo_[1] = std::min(lo_[1], y); hi_[1] = std::max(hi_[1], y);
        lo_[2] = std::min(lo_[2], z); hi_[2] = std::max(hi_[2], z);
        return agents_.back();
    };

    place(AgentType::CC, cx, cy, cz, {1, 0, 0});

    std::vector<std::array<int, 3>> positions = cfg_.vp_initial_positions;
    std::vector<std::array<int, 3>> directions = cfg_.vp_initial_directions;
    if (positions.empty()) {
        // Two voxels out along each axis, leaving the seed cell free
        // face-neighbours to divide into.
        for (const auto& d : kFaceNeighbours) {
            positions.push_back({cx + 2 * d[0], cy + 2 * d[1], cz + 2 * d[2]});
            directions.push_back(d);
        }
    }
    if (positions.empty()) throw std::invalid_argument("need at least one vessel seed");
    for (std::size_t i = 0; i < positions.size(); ++i) {
        std::array<int, 3> dir = i < directions.size() ? directions[i]
                                                       : std::array<int, 3>{1, 0, 0};
        const auto& p = positions[i];
        Agent& a = place(AgentType::VP, p[0], p[1], p[2], dir);
        vp_sources_.push_back(idx(a.x, a.y, a.z));
        ++vp_count_;
    }
    relax_oxygen(500); // near steady state of the initial sources
}

bool TumourState::in_lattice(int x, int y, int z) const {
    return x >= 0 && x < cfg_.nx && y >= 0 && y < cfg_.ny && z >= 0 && z < cfg_.nz;
}

double TumourState::oxygen_at(int x, int y, int z) const { return oxygen_[idx(x, y, z)]; }

void TumourState::relax_oxygen(int sweeps) {
    // Jacobi relaxation of diffusion - decay + secretion inside the occupied
    // bounding box plus a halo wide enough for the field to die off.
    const int halo = 24;
    const int x0 = std::max(0, lo_[0] - halo), x1 = std::min(cfg_.nx - 1, hi_[0] + halo);
    const int y0 = std::max(0, lo_[1] - halo), y1 = std::min(cfg_.ny - 1, hi_[1] + halo);
    const int z0 = std::max(0, lo_[2] - halo), z1 = std::min(cfg_.nz - 1, hi_[2] + halo);
    const double dcoef = cfg_.o2_diffusion;
    const double decay = cfg_.o2_decay;

    // Live cells consume oxygen: extra decay in their voxels.
    std::vector<double> source(oxygen_.size(), 0.0);
    for (std::int32_t v : vp_sources_) source[v] = cfg_.o2_secretion;
    std::vector<float> uptake(oxygen_.size(), 0.0f);
    for (const Agent& a : agents_)
        if (is_live_cell(a.kind))
            uptake[idx(a.x, a.y, a.z)] = static_cast<float>(cfg_.o2_cell_uptake);

    for (int s = 0; s < sweeps; ++s) {
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    double nb = 0.0;
                    int deg = 0;
                    if (x > 0) { nb += oxygen_[idx(x - 1, y, z)]; ++deg; }
                    if (x < cfg_.nx - 1) { nb += oxygen_[idx(x + 1, y, z)]; ++deg; }
                    if (y > 0) { nb += oxygen_[idx(x, y - 1, z)]; ++deg; }
                    if (y < cfg_.ny - 1) { nb += oxygen_[idx(x, y + 1, z)]; ++deg; }
                    if (z > 0) { nb += oxygen_[idx(x, y, z - 1)]; ++deg; }
                    if (z < cfg_.nz - 1) { nb += oxygen_[idx(x, y, z + 1)]; ++deg; }
                    const std::size_t i = idx(x, y, z);
                    oxygen_scratch_[i] =
                        (dcoef * nb + source[i]) / (deg * dcoef + decay + uptake[i]);
                }
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                    oxygen_[idx(x, y, z)] = oxygen_scratch_[idx(x, y, z)];
    }
}

void TumourState::extend_vessels() {
    std::vector<std::int32_t> tips;
    for (std::size_t i = 0; i < agents_.size(); ++i)
        if (agents_[i].kind == AgentType::VP && agents_[i].vp_tip)
            tips.push_back(static_cast<std::int32_t>(i));

    auto try_place_vp = [&](int x, int y, int z, std::array<int, 3> dir) -> bool {
        if (vp_count_ >= cfg_.vp_max_count) return false;
        if (!in_lattice(x, y, z) || grid_[idx(x, y, z)] != -1) return false;
        Agent a;
        a.id = next_id_++;
        a.kind = AgentType::VP;
        a.x = x; a.y = y; a.z = z;
        a.direction = dir;
        a.vp_tip = true;
        grid_[idx(x, y, z)] = static_cast<std::int32_t>(agents_.size());
        agents_.push_back(a);
        vp_sources_.push_back(idx(x, y, z));
        ++vp_count_;
        lo_[0] = std::min(lo_[0], x); hi_[0] = std::max(hi_[0], x);
        lo_[1] = std::min(lo_[1], y); hi_[1] = std::max(hi_[1], y);
        lo_[2] = std::min(lo_[2], z); hi_[2] = std::max(hi_[2], z);
        return true;
    };

    for (std::int32_t ti : tips) {
        if (vp_count_ >= cfg_.vp_max_count) break;
        Agent& tip = agents_[ti];
        std::array<int, 3> dir = tip.direction;
        int tx = tip.x + dir[0], ty = tip.y + dir[1], tz = tip.z + dir[2];
        bool extended = false;
        if (try_place_vp(tx, ty, tz, dir)) {
            extended = true;
        } else {
            // Blocked ahead: turn into a random free perpendicular voxel.
            std::vector<std::array<int, 3>> options;
            for (const auto& d : kFaceNeighbours) {
                if (d[0] * dir[0] + d[1] * dir[1] + d[2] * dir[2] != 0) continue;
                if (in_lattice(tip.x + d[0], tip.y + d[1], tip.z + d[2]) &&
                    grid_[idx(tip.x + d[0], tip.y + d[1], tip.z + d[2])] == -1)
                    options.push_back(d);
            }
            if (!options.empty()) {
                std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
                const auto d = options[pick(rng_)];
                if (try_place_vp(tip.x + d[0], tip.y + d[1], tip.z + d[2], d))
                    extended = true;
            }
        }
        if (extended) {
            agents_[ti].vp_tip = false;
            // Branch: a second child growing perpendicular to the parent.
            if (uniform01(rng_) < cfg_.vp_branch_freq) {
                const Agent& t = agents_[ti];
                std::vector<std::array<int, 3>> options;
                for (const auto& d : kFaceNeighbours) {
                    if (d[0] * t.direction[0] + d[1] * t.direction[1] +
                            d[2] * t.direction[2] != 0)
                        continue;
                    if (in_lattice(t.x + d[0], t.y + d[1], t.z + d[2]) &&
                        grid_[idx(t.x + d[0], t.y + d[1], t.z + d[2])] == -1)
                        options.push_back(d);
                }
                if (!options.empty()) {
                    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
                    const auto d = options[pick(rng_)];
                    try_place_vp(t.x + d[0], t.y + d[1], t.z + d[2], d);
                }
            }
        }
    }
}

void TumourState::step() {
    relax_oxygen(20);

    // Necrosis: hypoxic CCs die in place; CSCs only go dormant.
    for (Agent& a : agents_) {
        if (a.kind == AgentType::CC &&
            oxygen_[idx(a.x, a.y, a.z)] < cfg_.o2_necrosis_threshold)
            a.kind = AgentType::Necrotic;
        if (a.kind == AgentType::CSC)
            a.dormant = oxygen_[idx(a.x, a.y, a.z)] < cfg_.o2_prolif_threshold;
    }

    // Divisions in shuffled order over the agents alive at step start.
    const std::size_t n_start = agents_.size();
    std::vector<std::int32_t> order(n_start);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);

    for (std::int32_t ai : order) {
        // agents_ may reallocate as daughters are appended
        if (!is_live_cell(agents_[ai].kind)) continue;
        if (agents_[ai].kind == AgentType::CSC && agents_[ai].dormant) continue;
        const double o2 = oxygen_[idx(agents_[ai].x, agents_[ai].y, agents_[ai].z)];
        if (o2 < cfg_.o2_prolif_threshold) continue;
        if (uniform01(rng_) >= cfg_.division_prob_per_step) continue;

        std::vector<std::array<int, 3>> free;
        for (const auto& d : kFaceNeighbours) {
            const int x = agents_[ai].x + d[0], y = agents_[ai].y + d[1],
                      z = agents_[ai].z + d[2];
            if (in_lattice(x, y, z) && grid_[idx(x, y, z)] == -1)
                free.push_back({x, y, z});
        }
        if (free.empty()) continue; // no pushing: the attempt fails silently

        std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
        const auto site = free[pick(rng_)];
        const auto [parent_kind, daughter_kind] =
            sample_division(agents_[ai].kind, cfg_, rng_);
        agents_[ai].kind = parent_kind;

        Agent d;
        d.id = next_id_++;
        d.kind = daughter_kind;
        d.x = site[0]; d.y = site[1]; d.z = site[2];
        grid_[idx(d.x, d.y, d.z)] = static_cast<std::int32_t>(agents_.size());
        agents_.push_back(d);
        lo_[0] = std::min(lo_[0], d.x); hi_[0] = std::max(hi_[0], d.x);
        lo_[1] = std::min(lo_[1], d.y); hi_[1] = std::max(hi_[1], d.y);
        lo_[2] = std::min(lo_[2], d.z); hi_[2] = std::max(hi_[2], d.z);
    }

    extend_vessels();
    ++step_;
}

std::int64_t TumourState::live_cell_count() const {
    std::int64_t n = 0;
    for (const Agent& a : agents_)
        if (is_live_cell(a.kind)) ++n;
    return n;
}

TumourSnapshot TumourState::grow_until(std::int64_t target_cell_count) {
    if (target_cell_count < live_cell_count() && target_cell_count >= 1) {
        // already past target
    }
    std::int64_t best = live_cell_count();
    int stagnant_steps = 0;
    while (live_cell_count() < target_cell_count) {
        step();
        const std::int64_t now = live_cell_count();
        if (now > best) {
            best = now;
            stagnant_steps = 0;
        } else if (++stagnant_steps >= 200) {
            stalled_ = true;
            break;
        }
    }
    return snapshot();
}

TumourSnapshot TumourState::snapshot() const {
    TumourSnapshot s;
    s.step = step_;
    s.nx = cfg_.nx; s.ny = cfg_.ny; s.nz = cfg_.nz;
    s.agents = agents_;
    s.oxygen = oxygen_;
    s.stalled = stalled_;
    return s;
}

std::map<AgentType, std::int64_t> type_counts(const TumourSnapshot& snap) {
    std::map<AgentType, std::int64_t> counts;
    for (const Agent& a : snap.agents) ++counts[a.kind];
    return counts;
}

void write_snapshot(std::ostream& out, const TumourSnapshot& snap) {
    out << "step=" << snap.step << " dims=" << snap.nx << ',' << snap.ny << ','
        << snap.nz << '\n';
    for (const Agent& a : snap.agents)
        out << a.id << ',' << to_string(a.kind) << ',' << a.x << ',' << a.y << ','
            << a.z << ',' << (a.dormant ? 1 : 0) << '\n';
}

TumourSnapshot read_snapshot(std::istream& in) {
    TumourSnapshot snap;
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("snapshot: missing header");
    long long step = 0;
    if (std::sscanf(line.c_str(), "step=%lld dims=%d,%d,%d", &step, &snap.nx,
                    &snap.ny, &snap.nz) != 4)
        throw std::runtime_error("snapshot: malformed header at line 1");
    snap.step = step;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        Agent a;
        char kind[8] = {0};
        long long id = 0;
        int dormant = 0;
        if (std::sscanf(line.c_str(), "%lld,%7[^,],%d,%d,%d,%d", &id, kind, &a.x,
                        &a.y, &a.z, &dormant) != 6)
            throw std::runtime_error("snapshot: malformed agent at line " +
                                     std::to_string(lineno));
        a.id = id;
        a.kind = agent_type_from_string(kind);
        a.dormant = dormant != 0;
        snap.agents.push_back(a);
    }
    return snap;
}

void write_snapshot_file(const std::string& path, const TumourSnapshot& snap) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    write_snapshot(f, snap);
}

TumourSnapshot read_snapshot_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    return read_snapshot(f);
}

void write_oxygen_file(const std::string& path, const TumourSnapshot& snap) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    for (std::size_t i = 0; i < snap.oxygen.size(); ++i)
        f << snap.oxygen[i] << ((i + 1) % static_cast<std::size_t>(snap.nx) == 0 ? '\n' : ' ');
}

} // namespace ncopt
