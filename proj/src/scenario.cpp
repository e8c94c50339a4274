#include "ncopt/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ncopt {

char compartment_token(CompartmentKind k) {
    switch (k) {
        case CompartmentKind::VP: return 'V';
        case CompartmentKind::CC: return 'C';
        case CompartmentKind::CSC: return 'S';
        case CompartmentKind::ECM: return 'E';
    }
    return '?';
}

CompartmentKind compartment_from_token(char c) {
    switch (c) {
        case 'V': return CompartmentKind::VP;
        case 'C': return CompartmentKind::CC;
        case 'S': return CompartmentKind::CSC;
        case 'E': return CompartmentKind::ECM;
    }
    throw std::invalid_argument(std::string("unknown compartment token: ") + c);
}

int Scenario::n_cells() const { return n_cc() + n_csc(); }

int Scenario::n_cc() const {
    return static_cast<int>(
        std::count(compartments.begin(), compartments.end(), CompartmentKind::CC));
}

int Scenario::n_csc() const {
    return static_cast<int>(
        std::count(compartments.begin(), compartments.end(), CompartmentKind::CSC));
}

namespace scenario {

double nearest_rank_percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(values.size())));
    return values[std::max<std::size_t>(rank, 1) - 1];
}

DepthStats depth_stats(const TumourSnapshot& snapshot) {
    std::vector<const Agent*> vps;
    for (const Agent& a : snapshot.agents)
        if (a.kind == AgentType::VP) vps.push_back(&a);
    if (vps.empty()) throw std::runtime_error("depth_stats: snapshot has no VP");

    const double voxel_um = 10.0;
    DepthStats stats;
    for (const Agent& a : snapshot.agents) {
        if (a.kind != AgentType::CC && a.kind != AgentType::CSC) continue;
        double best = std::numeric_limits<double>::max();
        for (const Agent* v : vps) {
            const double dx = a.x - v->x, dy = a.y - v->y, dz = a.z - v->z;
            best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        stats.distances_um.push_back(std::sqrt(best) * voxel_um);
    }
    if (stats.distances_um.empty())
        throw std::runtime_error("depth_stats: snapshot has no CC/CSC");
    stats.p95_um = nearest_rank_percentile(stats.distances_um, 0.95);
    stats.depth_cells = static_cast<int>(std::ceil(stats.p95_um / voxel_um));
    return stats;
}

std::vector<Scenario> extract_scenarios(const TumourSnapshot& snapshot, int n,
                                        int depth_cells, std::uint64_t rng_seed) {
    if (n < 0) throw std::invalid_argument("n must be >= 0");
    if (depth_cells < 1) throw std::invalid_argument("depth_cells must be >= 1");
    std::vector<const Agent*> vps;
    for (const Agent& a : snapshot.agents)
        if (a.kind == AgentType::VP) vps.push_back(&a);
    if (vps.empty()) throw std::runtime_error("extract_scenarios: snapshot has no VP");

    // Occupancy map rebuilt from the agent list so snapshots loaded from
    // file work the same as freshly grown ones.
    const std::size_t nvox =
        static_cast<std::size_t>(snapshot.nx) * snapshot.ny * snapshot.nz;
    std::vector<std::int32_t> grid(nvox, -1);
    for (std::size_t i = 0; i < snapshot.agents.size(); ++i) {
        const Agent& a = snapshot.agents[i];
        grid[a.x + static_cast<std::size_t>(snapshot.nx) * (a.y + static_cast<std::size_t>(snapshot.ny) * a.z)] =
            static_cast<std::int32_t>(i);
    }

    constexpr std::array<std::array<int, 3>, 6> axes{{
        {{1, 0, 0}}, {{-1, 0, 0}}, {{0, 1, 0}}, {{0, -1, 0}}, {{0, 0, 1}}, {{0, 0, -1}},
    }};

    Rng rng(rng_seed);
    std::vector<Scenario> out;
    out.reserve(n);
    for (int k = 0; k < n; ++k) {
        std::uniform_int_distribution<std::size_t> pick_vp(0, vps.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_axis(0, axes.size() - 1);
        const Agent* vp = vps[pick_vp(rng)];
        const auto dir = axes[pick_axis(rng)];

        Scenario s;
        s.id = "s" + std::to_string(k);
        s.compartments.push_back(CompartmentKind::VP);
        for (int step = 1; step <= depth_cells; ++step) {
            const int x = vp->x + dir[0] * step, y = vp->y + dir[1] * step,
                      z = vp->z + dir[2] * step;
            CompartmentKind kind = CompartmentKind::ECM;
            if (x >= 0 && x < snapshot.nx && y >= 0 && y < snapshot.ny && z >= 0 &&
                z < snapshot.nz) {
                const std::int32_t ai =
                    grid[x + static_cast<std::size_t>(snapshot.nx) *
                                 (y + static_cast<std::size_t>(snapshot.ny) * z)];
                if (ai >= 0) {
                    switch (snapshot.agents[ai].kind) {
                        case AgentType::CC: kind = CompartmentKind::CC; break;
                        case AgentType::CSC: kind = CompartmentKind::CSC; break;
                        case AgentType::VP: kind = CompartmentKind::VP; break;
                        case AgentType::Necrotic: kind = CompartmentKind::ECM; break;
                    }
                }
            }
            s.compartments.push_back(kind);
        }
        out.push_back(std::move(s));
    }
    return out;
}

Scenario worst_case_homogeneous() {
    Scenario s;
    s.id = "worst_case_homogeneous";
    s.compartments.assign(23, CompartmentKind::CC);
    s.compartments[0] = CompartmentKind::VP;
    return s;
}

Scenario worst_case_heterogeneous() {
    Scenario s;
    s.id = "worst_case_heterogeneous";
    s.compartments.assign(23, CompartmentKind::CC);
    s.compartments[0] = CompartmentKind::VP;
    s.compartments[14] = CompartmentKind::CSC; // 140 um from the VP
    s.compartments[18] = CompartmentKind::CSC; // 180 um from the VP
    return s;
}

void write_scenarios(std::ostream& out, const std::vector<Scenario>& scenarios) {
    for (const Scenario& s : scenarios) {
        out << s.id;
        for (CompartmentKind k : s.compartments) out << ' ' << compartment_token(k);
        out << '\n';
    }
}

std::vector<Scenario> read_scenarios(std::istream& in) {
    std::vector<Scenario> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        Scenario s;
        if (!(ss >> s.id))
            throw std::runtime_error("scenario file: malformed line " +
                                     std::to_string(lineno));
        std::string tok;
        while (ss >> tok) {
            if (tok.size() != 1)
                throw std::runtime_error("scenario file: bad token on line " +
                                         std::to_string(lineno));
            s.compartments.push_back(compartment_from_token(tok[0]));
        }
        if (s.compartments.size() < 2 || s.compartments[0] != CompartmentKind::VP)
            throw std::runtime_error(
                "scenario file: scenario must start with V and have length >= 2, line " +
                std::to_string(lineno));
        out.push_back(std::move(s));
    }
    return out;
}

void write_scenario_file(const std::string& path, const std::vector<Scenario>& scenarios) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    write_scenarios(f, scenarios);
}

std::vector<Scenario> read_scenario_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    return read_scenarios(f);
}

} // namespace scenario
} // namespace ncopt
