#include "ncopt/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ncopt::config {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

class KvReader {
public:
    explicit KvReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

    double num(const std::string& key, double fallback) {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(it->first);
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw std::runtime_error("config: bad number for " + key + ": " + it->second);
        }
    }

    std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(it->first);
        return std::stoull(it->second);
    }

    std::string str(const std::string& key, const std::string& fallback) {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(it->first);
        return it->second;
    }

    bool boolean(const std::string& key, bool fallback) {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(it->first);
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw std::runtime_error("config: bad boolean for " + key);
    }

    void check_all_used() const {
        for (const auto& [k, v] : kv_)
            if (!used_.count(k))
                throw std::runtime_error("config: unknown key " + k);
    }

private:
    std::map<std::string, std::string> kv_;
    std::set<std::string> used_;
};

} // namespace

std::map<std::string, std::string> parse_kv(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config: bad section header at line " +
                                         std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key=value at line " +
                                     std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        kv[section.empty() ? key : section + "." + key] = value;
    }
    return kv;
}

PipelineConfig defaults() { return PipelineConfig{}; }

PipelineConfig load(std::istream& in) {
    KvReader kv(parse_kv(in));
    PipelineConfig c;

    c.master_seed = kv.u64("master_seed", c.master_seed);
    c.out_dir = kv.str("out", c.out_dir);

    const int lattice = static_cast<int>(kv.num("tumour.lattice", c.tumour.nx));
    c.tumour.nx = c.tumour.ny = c.tumour.nz = lattice;
    c.tumour.dediff_prob = kv.num("tumour.dediff_prob", c.tumour.dediff_prob);
    c.tumour.csc_asym_prob = kv.num("tumour.csc_asym_prob", c.tumour.csc_asym_prob);
    c.tumour.csc_sym_two_csc_prob =
        kv.num("tumour.csc_sym_two_csc_prob", c.tumour.csc_sym_two_csc_prob);
    c.tumour.vp_max_count =
        static_cast<int>(kv.num("tumour.vp_max_count", c.tumour.vp_max_count));
    c.tumour.vp_branch_freq = kv.num("tumour.vp_branch_freq", c.tumour.vp_branch_freq);
    c.tumour.o2_secretion = kv.num("tumour.o2_secretion", c.tumour.o2_secretion);
    c.tumour.o2_decay = kv.num("tumour.o2_decay", c.tumour.o2_decay);
    c.tumour.o2_cell_uptake = kv.num("tumour.o2_cell_uptake", c.tumour.o2_cell_uptake);
    c.tumour.o2_diffusion = kv.num("tumour.o2_diffusion", c.tumour.o2_diffusion);
    c.tumour.o2_prolif_threshold =
        kv.num("tumour.o2_prolif_threshold", c.tumour.o2_prolif_threshold);
    c.tumour.o2_necrosis_threshold =
        kv.num("tumour.o2_necrosis_threshold", c.tumour.o2_necrosis_threshold);
    c.tumour.division_prob_per_step =
        kv.num("tumour.division_prob", c.tumour.division_prob_per_step);
    c.tumour.target_cell_count = static_cast<std::int64_t>(
        kv.num("tumour.target_cells", static_cast<double>(c.tumour.target_cell_count)));
    c.tumour.spawn_csc = kv.boolean("tumour.spawn_csc", c.tumour.spawn_csc);

    c.host.weight_g = kv.num("host.weight_g", c.host.weight_g);
    c.host.pid_fraction = kv.num("host.pid_fraction", c.host.pid_fraction);
    c.host.tumour_volume_mm3 = kv.num("host.tumour_volume_mm3", c.host.tumour_volume_mm3);
    c.host.circulation_time_s =
        kv.num("host.circulation_h", c.host.circulation_time_s / 3600.0) * 3600.0;
    c.host.cell_length_m = kv.num("host.cell_length_um", c.host.cell_length_m * 1e6) * 1e-6;
    c.host.receptors_per_cell = kv.num("host.receptors_per_cell", c.host.receptors_per_cell);

    c.drug.name = kv.str("drug.name", c.drug.name);
    c.drug.molar_mass_g_mol = kv.num("drug.molar_mass_g_mol", c.drug.molar_mass_g_mol);
    c.drug.potency_ic90_mol_l = kv.num("drug.ic90_mol_l", c.drug.potency_ic90_mol_l);

    c.scenario_n = static_cast<int>(kv.num("scenario.n", c.scenario_n));
    const std::string depth = kv.str("scenario.depth", std::to_string(c.scenario_depth));
    c.scenario_depth = depth == "auto" ? -1 : std::stoi(depth);
    if (c.scenario_depth > 0) c.geometry.n_cells = c.scenario_depth;
    c.geometry.compartment_length_m = c.host.cell_length_m;

    const std::string backend = kv.str("tissue.backend", "tau");
    if (backend == "tau") c.tissue_backend = PipelineConfig::Backend::Tau;
    else if (backend == "ssa") c.tissue_backend = PipelineConfig::Backend::Ssa;
    else throw std::runtime_error("config: tissue.backend must be ssa or tau");
    c.tau_epsilon = kv.num("tissue.epsilon", c.tau_epsilon);
    c.trajectory_interval_s = kv.num("tissue.traj_interval_s", c.trajectory_interval_s);

    c.evolve.population = static_cast<int>(kv.num("evolve.population", c.evolve.population));
    c.evolve.tournament = static_cast<int>(kv.num("evolve.tournament", c.evolve.tournament));
    c.evolve.mutation_prob = kv.num("evolve.mutation_prob", c.evolve.mutation_prob);
    c.evolve.mutation_step = kv.num("evolve.mutation_step", c.evolve.mutation_step);
    c.evolve.generations = static_cast<int>(kv.num("evolve.generations", c.evolve.generations));
    c.evolve.weight_w = kv.num("evolve.weight", c.evolve.weight_w);
    const std::string mode = kv.str("evolve.scenario_mode", "worst_case");
    if (mode == "worst_case") c.evolve.scenario_mode = ScenarioMode::WorstCase;
    else if (mode == "random_k") c.evolve.scenario_mode = ScenarioMode::RandomK;
    else throw std::runtime_error("config: evolve.scenario_mode must be worst_case or random_k");
    c.evolve.random_k = static_cast<int>(kv.num("evolve.random_k", c.evolve.random_k));
    c.evolve.dose_normalizer_mg_kg =
        kv.num("evolve.dose_normalizer", c.evolve.dose_normalizer_mg_kg);
    c.evolve.dose_cap_mg_kg = kv.num("evolve.dose_cap", c.evolve.dose_cap_mg_kg);
    c.evolve.replicates = static_cast<int>(kv.num("evolve.replicates", c.evolve.replicates));
    const std::string repl = kv.str("evolve.replacement", "generational");
    if (repl == "generational") c.evolve.replacement = ReplacementMode::Generational;
    else if (repl == "steady_state") c.evolve.replacement = ReplacementMode::SteadyState;
    else throw std::runtime_error("config: evolve.replacement must be generational or steady_state");
    c.heterogeneous = kv.boolean("evolve.heterogeneous", c.heterogeneous);

    kv.check_all_used();
    c.evolve.master_seed = c.master_seed;
    c.tumour.seed = c.master_seed;
    return c;
}

PipelineConfig load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config " + path);
    return load(f);
}

void write(std::ostream& out, const PipelineConfig& c) {
    out.precision(17);
    out << "master_seed=" << c.master_seed << "\n";
    out << "out=" << c.out_dir << "\n";
    out << "[tumour]\n";
    out << "lattice=" << c.tumour.nx << "\n";
    out << "dediff_prob=" << c.tumour.dediff_prob << "\n";
    out << "csc_asym_prob=" << c.tumour.csc_asym_prob << "\n";
    out << "csc_sym_two_csc_prob=" << c.tumour.csc_sym_two_csc_prob << "\n";
    out << "vp_max_count=" << c.tumour.vp_max_count << "\n";
    out << "vp_branch_freq=" << c.tumour.vp_branch_freq << "\n";
    out << "o2_secretion=" << c.tumour.o2_secretion << "\n";
    out << "o2_decay=" << c.tumour.o2_decay << "\n";
    out << "o2_cell_uptake=" << c.tumour.o2_cell_uptake << "\n";
    out << "o2_diffusion=" << c.tumour.o2_diffusion << "\n";
    out << "o2_prolif_threshold=" << c.tumour.o2_prolif_threshold << "\n";
    out << "o2_necrosis_threshold=" << c.tumour.o2_necrosis_threshold << "\n";
    out << "division_prob=" << c.tumour.division_prob_per_step << "\n";
    out << "target_cells=" << c.tumour.target_cell_count << "\n";
    out << "spawn_csc=" << (c.tumour.spawn_csc ? "true" : "false") << "\n";
    out << "[host]\n";
    out << "weight_g=" << c.host.weight_g << "\n";
    out << "pid_fraction=" << c.host.pid_fraction << "\n";
    out << "tumour_volume_mm3=" << c.host.tumour_volume_mm3 << "\n";
    out << "circulation_h=" << c.host.circulation_time_s / 3600.0 << "\n";
    out << "cell_length_um=" << c.host.cell_length_m * 1e6 << "\n";
    out << "receptors_per_cell=" << c.host.receptors_per_cell << "\n";
    out << "[drug]\n";
    out << "name=" << c.drug.name << "\n";
    out << "molar_mass_g_mol=" << c.drug.molar_mass_g_mol << "\n";
    out << "ic90_mol_l=" << c.drug.potency_ic90_mol_l << "\n";
    out << "[scenario]\n";
    out << "n=" << c.scenario_n << "\n";
    out << "depth=" << (c.scenario_depth > 0 ? std::to_string(c.scenario_depth) : "auto")
        << "\n";
    out << "[tissue]\n";
    out << "backend=" << (c.tissue_backend == PipelineConfig::Backend::Tau ? "tau" : "ssa")
        << "\n";
    out << "epsilon=" << c.tau_epsilon << "\n";
    out << "traj_interval_s=" << c.trajectory_interval_s << "\n";
    out << "[evolve]\n";
    out << "population=" << c.evolve.population << "\n";
    out << "tournament=" << c.evolve.tournament << "\n";
    out << "mutation_prob=" << c.evolve.mutation_prob << "\n";
    out << "mutation_step=" << c.evolve.mutation_step << "\n";
    out << "generations=" << c.evolve.generations << "\n";
    out << "weight=" << c.evolve.weight_w << "\n";
    out << "scenario_mode="
        << (c.evolve.scenario_mode == ScenarioMode::WorstCase ? "worst_case" : "random_k")
        << "\n";
    out << "random_k=" << c.evolve.random_k << "\n";
    out << "dose_normalizer=" << c.evolve.dose_normalizer_mg_kg << "\n";
    out << "dose_cap=" << c.evolve.dose_cap_mg_kg << "\n";
    out << "replicates=" << c.evolve.replicates << "\n";
    out << "replacement="
        << (c.evolve.replacement == ReplacementMode::Generational ? "generational"
                                                                  : "steady_state")
        << "\n";
    out << "heterogeneous=" << (c.heterogeneous ? "true" : "false") << "\n";
}

} // namespace ncopt::config
