// kinoforge: one binary, one subcommand per pipeline stage.
//
// Every stage takes flags or a config file (--config FILE, "key = value" lines under
// "[stage]" headers); flags win.  The resolved settings are written to <out>/<stage>.cfg,
// and passing that file back as --config reruns the stage with identical inputs.
//
// Exit status: 0 ok, 2 usage error (bad flag or value, missing input, config conflict),
// 1 runtime failure.  Errors are one line on stderr:
//   kinoforge: error stage=<stage> kind=<usage|runtime> message="..."

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "kinoforge/datagen/build.hpp"
#include "kinoforge/datagen/collect.hpp"
#include "kinoforge/datagen/dataset.hpp"
#include "kinoforge/eval/report.hpp"
#include "kinoforge/ikd/train.hpp"
#include "kinoforge/sim/presets.hpp"

namespace fs = std::filesystem;
using namespace kinoforge;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Field {
    Field(std::string k, std::string d, std::string h) : key(std::move(k)), def(std::move(d)), help(std::move(h)) {}

    std::string key; // config key; the flag is --key with '_' -> '-'
    std::string def;
    std::string help;
    std::string flag_value;
    CLI::Option *opt = nullptr;
};

std::string trim(const std::string &s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return "";
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

/// section -> key -> value.  Duplicate keys within a section are a conflict.
std::map<std::string, std::map<std::string, std::string>> read_config(const std::string &path)
{
    std::ifstream f(path);
    if (!f)
        throw UsageError("config file not found: " + path);
    std::map<std::string, std::map<std::string, std::string>> out;
    std::string section, line;
    for (int n = 1; std::getline(f, line); ++n) {
        line = trim(line.substr(0, line.find('#')));
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw UsageError(path + ":" + std::to_string(n) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(n) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (!out[section].emplace(key, trim(line.substr(eq + 1))).second)
            throw UsageError(path + ":" + std::to_string(n) + ": '" + key + "' set twice in [" + section + "]");
    }
    return out;
}

class Stage {
public:
    Stage(CLI::App &app, std::string name, std::string help, std::vector<Field> fields)
        : name_(std::move(name)), fields_(std::move(fields))
    {
        sub_ = app.add_subcommand(name_, help);
        sub_->add_option("--config", config_path_, "key = value config file; flags override it");
        for (auto &f : fields_) {
            std::string flag = "--" + f.key;
            std::replace(flag.begin(), flag.end(), '_', '-');
            f.opt = sub_->add_option(flag, f.flag_value, f.help + (f.def.empty() ? "" : " [" + f.def + "]"));
        }
    }

    CLI::App *app() const { return sub_; }
    const std::string &name() const { return name_; }

    /// defaults < config file < flags
    void resolve()
    {
        std::map<std::string, std::string> file;
        if (!config_path_.empty()) {
            auto cfg = read_config(config_path_);
            for (const auto &[sec, kv] : cfg)
                if (!sec.empty() && sec != name_)
                    throw UsageError("config section [" + sec + "] does not belong to '" + name_ + "'");
            for (const auto &sec : {std::string(), name_})
                for (const auto &[k, v] : cfg[sec]) {
                    if (!has(k))
                        throw UsageError("unknown config key '" + k + "' for " + name_);
                    if (!file.emplace(k, v).second)
                        throw UsageError("config key '" + k + "' set both globally and in [" + name_ + "]");
                }
        }
        for (const auto &f : fields_) {
            std::string v = f.def;
            if (auto it = file.find(f.key); it != file.end())
                v = it->second;
            if (f.opt->count())
                v = f.flag_value;
            values_[f.key] = v;
        }
    }

    bool has(const std::string &k) const
    {
        return std::any_of(fields_.begin(), fields_.end(), [&](const Field &f) { return f.key == k; });
    }

    std::string str(const std::string &k) const { return values_.at(k); }

    std::string required(const std::string &k) const
    {
        const std::string v = str(k);
        if (v.empty())
            throw UsageError("missing required setting --" + dashed(k));
        return v;
    }

    double real(const std::string &k) const
    {
        try {
            std::size_t pos = 0;
            const double d = std::stod(str(k), &pos);
            if (pos == str(k).size() && std::isfinite(d))
                return d;
        } catch (const std::logic_error &) {
        }
        throw UsageError("--" + dashed(k) + ": expected a number, got '" + str(k) + "'");
    }

    long long integer(const std::string &k) const
    {
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(str(k), &pos);
            if (pos == str(k).size())
                return v;
        } catch (const std::logic_error &) {
        }
        throw UsageError("--" + dashed(k) + ": expected an integer, got '" + str(k) + "'");
    }

    int positive(const std::string &k) const
    {
        const long long v = integer(k);
        if (v < 1 || v > 1'000'000'000)
            throw UsageError("--" + dashed(k) + " must be a positive integer");
        return static_cast<int>(v);
    }

    bool boolean(const std::string &k) const
    {
        const std::string v = str(k);
        if (v == "true" || v == "1" || v == "yes")
            return true;
        if (v == "false" || v == "0" || v == "no")
            return false;
        throw UsageError("--" + dashed(k) + ": expected true or false, got '" + v + "'");
    }

    std::string existing_file(const std::string &k) const
    {
        const std::string p = required(k);
        if (!fs::is_regular_file(p))
            throw UsageError("file not found: " + p);
        return fs::absolute(p).string();
    }

    std::string existing_dir(const std::string &k) const
    {
        const std::string p = required(k);
        if (!fs::is_directory(p))
            throw UsageError("directory not found: " + p);
        return fs::absolute(p).string();
    }

    /// Output directory: --out, else $KINOFORGE_OUT/<stage>, else ./kinoforge-out/<stage>.
    fs::path out_dir()
    {
        std::string o = str("out");
        if (o.empty()) {
            const char *root = std::getenv("KINOFORGE_OUT");
            o = (fs::path(root && *root ? root : "kinoforge-out") / name_).string();
        }
        const fs::path p = fs::absolute(o);
        fs::create_directories(p);
        values_["out"] = p.string();
        return p;
    }

    void set(const std::string &k, const std::string &v) { values_[k] = v; }

    /// Writes <out>/<stage>.cfg with every setting in declaration order.
    void write_resolved(const fs::path &out) const
    {
        std::ofstream f(out / (name_ + ".cfg"));
        f << "# resolved settings for 'kinoforge " << name_ << "'\n[" << name_ << "]\n";
        for (const auto &fd : fields_)
            f << fd.key << " = " << values_.at(fd.key) << "\n";
        if (!f)
            throw std::runtime_error("cannot write resolved config in " + out.string());
    }

private:
    static std::string dashed(std::string k)
    {
        std::replace(k.begin(), k.end(), '_', '-');
        return k;
    }

    std::string name_;
    CLI::App *sub_ = nullptr;
    std::string config_path_;
    std::vector<Field> fields_;
    std::map<std::string, std::string> values_;
};

void note(const std::string &msg) { std::cerr << "kinoforge: " << msg << std::endl; }

std::string fmt(double v, int prec = 4)
{
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

double since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::string> split_list(const std::string &s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty())
            out.push_back(trim(item));
    return out;
}

sim::TerrainMap load_world(const std::string &path)
{
    try {
        return sim::TerrainMap::load(path);
    } catch (const std::exception &e) {
        throw UsageError(std::string("bad world file: ") + e.what());
    }
}

// --- gen-world -------------------------------------------------------------------------

int run_gen_world(Stage &st)
{
    const std::string preset = st.required("preset");
    const auto &names = sim::preset_names();
    if (std::find(names.begin(), names.end(), preset) == names.end())
        throw UsageError("unknown preset '" + preset + "'");
    const auto seed = static_cast<std::uint64_t>(st.integer("seed"));
    const double ref_speed = st.real("ref_speed");
    if (!(ref_speed > 0 && ref_speed <= 1.0))
        throw UsageError("--ref-speed must be in (0, 1] m/s");
    const fs::path out = st.out_dir();

    const sim::Preset p = sim::make_preset(preset, seed);
    p.world.save((out / "world.world").string());
    p.route.save((out / "route.route").string());
    const auto ref = eval::record_reference(p.world, p.route, sim::SimConfig{}, seed, ref_speed);
    eval::save_reference((out / "reference.ref").string(), ref);
    st.write_resolved(out);
    note("gen-world: " + preset + ", lap " + fmt(ref.lap_length) + " m, " + std::to_string(ref.turns.size())
         + " turns -> " + out.string());
    return 0;
}

// --- collect ---------------------------------------------------------------------------

int run_collect(Stage &st)
{
    const std::string world_path = st.existing_file("world");
    const sim::TerrainMap world = load_world(world_path);
    st.set("world", world_path);
    datagen::CollectConfig c;
    c.duration = st.real("duration");
    c.seed = static_cast<std::uint64_t>(st.integer("seed"));
    c.v_max = st.real("v_max");
    c.omega_max = st.real("omega_max");
    c.hold_min = st.real("hold_min");
    c.hold_max = st.real("hold_max");
    c.max_trajectory = st.real("max_trajectory");
    if (!(c.duration > 0) || !(c.max_trajectory > 0))
        throw UsageError("--duration and --max-trajectory must be positive");
    if (!(c.v_max > 0 && c.v_max <= sim::kVMax) || !(c.omega_max >= 0 && c.omega_max <= sim::kOmegaMax))
        throw UsageError("command ranges must lie within v in (0, 4], |omega| <= 1.8");
    if (!(c.hold_min > 0 && c.hold_max >= c.hold_min))
        throw UsageError("need 0 < hold-min <= hold-max");
    const fs::path out = st.out_dir();

    const auto t0 = std::chrono::steady_clock::now();
    datagen::Manifest m;
    m.set("kind", "logs");
    m.set("world", world_path);
    m.set("world_hash", std::to_string(world.content_hash()));
    std::size_t exits = 0;
    const std::size_t issued = datagen::collect(world, c, [&](datagen::TrajectoryLog &&log) {
        const std::string name = datagen::trajectory_file(log.index, "log");
        datagen::write_log((out / name).string(), log);
        m.files.emplace_back(name, log.commands.size());
        exits += log.end == datagen::EndReason::exited;
    });
    m.set("seed", c.seed);
    m.set("duration", c.duration);
    m.set("commands_issued", issued);
    m.set("trajectories", m.files.size());
    m.set("boundary_exits", exits);
    m.save((out / "manifest.txt").string());
    st.write_resolved(out);
    note("collect: " + std::to_string(m.files.size()) + " trajectories, " + std::to_string(issued) + " commands, "
         + std::to_string(exits) + " exits in " + fmt(since(t0), 3) + " s -> " + out.string());
    return 0;
}

// --- build-samples ---------------------------------------------------------------------

int run_build(Stage &st)
{
    const std::string logs = st.existing_dir("logs");
    st.set("logs", logs);
    datagen::BuildConfig bc;
    bc.k = st.positive("k");
    bc.max_views = st.positive("max_views");
    bc.min_valid = st.real("min_valid");
    bc.predict = st.boolean("predict");
    const int jobs = st.positive("jobs");
    if (!(bc.min_valid >= 0 && bc.min_valid <= 1))
        throw UsageError("--min-valid must be in [0, 1]");
    datagen::Manifest in;
    try {
        in = datagen::Manifest::load((fs::path(logs) / "manifest.txt").string());
    } catch (const std::exception &e) {
        throw UsageError(std::string("not a log directory: ") + e.what());
    }
    if (in.require("kind") != "logs")
        throw UsageError(logs + " is not a log directory");
    const fs::path out = st.out_dir();

    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = in.files.size();
    std::vector<datagen::BuildStats> stats(n);
    std::vector<std::string> names(n);
    std::vector<std::size_t> counts(n);
    std::atomic<std::size_t> done{0};
    std::mutex io;
    ikd::detail::parallel_for(n, jobs, [&](std::size_t i) {
        const auto log = datagen::read_log((fs::path(logs) / in.files[i].first).string());
        const auto samples = datagen::build_samples(log, bc, &stats[i]);
        names[i] = datagen::trajectory_file(log.index, "smp");
        counts[i] = samples.size();
        datagen::write_samples((out / names[i]).string(), samples);
        const std::size_t d = ++done;
        if (d % 5 == 0 || d == n) {
            std::lock_guard<std::mutex> lock(io);
            note("build-samples: " + std::to_string(d) + "/" + std::to_string(n) + " trajectories");
        }
    });
    datagen::BuildStats total;
    datagen::Manifest m;
    m.set("kind", "samples");
    m.set("logs", logs);
    if (const auto *w = in.get("world"))
        m.set("world", *w);
    for (std::size_t i = 0; i < n; ++i) {
        total += stats[i];
        m.files.emplace_back(names[i], counts[i]);
    }
    m.set("k", bc.k);
    m.set("max_views", bc.max_views);
    m.set("predict", bc.predict ? "true" : "false");
    m.set("ticks", total.ticks);
    m.set("samples", total.samples);
    m.set("dropped_window", total.dropped_window);
    m.set("dropped_tail", total.dropped_tail);
    m.set("with_patches", total.with_patches);
    m.set("patches", total.patches);
    m.save((out / "manifest.txt").string());
    st.write_resolved(out);
    note("build-samples: " + std::to_string(total.samples) + " samples (" + std::to_string(total.dropped_window)
         + " dropped for short windows, " + std::to_string(total.dropped_tail) + " at trajectory ends), "
         + std::to_string(total.with_patches) + " with patches, in " + fmt(since(t0), 3) + " s -> " + out.string());
    return 0;
}

// --- train -----------------------------------------------------------------------------

int run_train(Stage &st)
{
    const std::string dir = st.existing_dir("samples");
    st.set("samples", dir);
    ikd::Variant variant;
    try {
        variant = ikd::parse_variant(st.required("variant"));
    } catch (const std::invalid_argument &e) {
        throw UsageError(e.what());
    }
    ikd::TrainConfig tc;
    tc.epochs = st.positive("epochs");
    tc.batch = st.positive("batch");
    tc.lr = st.real("lr");
    tc.seed = static_cast<std::uint64_t>(st.integer("seed"));
    tc.hidden = st.positive("hidden");
    tc.jobs = st.positive("jobs");
    if (!(tc.lr > 0))
        throw UsageError("--lr must be positive");
    const auto split_seed = static_cast<std::uint64_t>(st.integer("split_seed"));
    datagen::Manifest sm;
    std::vector<datagen::TrainingSample> all;
    try {
        all = datagen::load_sample_dir(dir, &sm);
    } catch (const FormatError &e) {
        throw UsageError(std::string("bad sample directory: ") + e.what());
    }
    if (const auto *k = sm.get("k"))
        tc.k = std::stoi(*k);
    const fs::path out = st.out_dir();

    auto [train_set, test_set] = datagen::split(std::move(all), split_seed);
    note("train: " + std::string(ikd::variant_name(variant)) + " on " + std::to_string(train_set.size()) + " train / "
         + std::to_string(test_set.size()) + " test samples");
    std::ofstream loss(out / "loss.csv");
    loss << "epoch,train_loss,test_loss\n";
    const auto result = ikd::train(train_set, test_set, tc, variant, [&](int epoch, double tr, double te) {
        loss << epoch + 1 << ',' << fmt(tr, 10) << ',' << fmt(te, 10) << '\n';
        if ((epoch + 1) % 5 == 0 || epoch + 1 == tc.epochs)
            note("train: epoch " + std::to_string(epoch + 1) + " train " + fmt(tr) + " test " + fmt(te));
    });
    std::ostringstream meta;
    meta << "samples=" << dir << " split_seed=" << split_seed << " epochs=" << tc.epochs
         << " final_test_loss=" << fmt(result.test_loss.back(), 8);
    result.model.save((out / "model.ckpt").string(), meta.str());
    st.write_resolved(out);
    note("train: done in " + fmt(result.seconds, 4) + " s, test loss " + fmt(result.test_loss.back()) + " -> "
         + (out / "model.ckpt").string());
    return 0;
}

// --- eval ------------------------------------------------------------------------------

std::vector<std::uint64_t> parse_seeds(const std::string &s)
{
    const auto dots = s.find("..");
    try {
        if (dots == std::string::npos) {
            std::vector<std::uint64_t> out;
            for (const auto &x : split_list(s))
                out.push_back(std::stoull(x));
            if (!out.empty())
                return out;
        } else {
            const auto a = std::stoull(s.substr(0, dots)), b = std::stoull(s.substr(dots + 2));
            if (b >= a && b - a < 100000) {
                std::vector<std::uint64_t> out;
                for (auto v = a; v <= b; ++v)
                    out.push_back(v);
                return out;
            }
        }
    } catch (const std::logic_error &) {
    }
    throw UsageError("--seeds: expected A..B or a comma list, got '" + s + "'");
}

int run_eval(Stage &st)
{
    const std::string world_path = st.existing_file("world");
    const std::string ref_path = st.existing_file("ref");
    st.set("world", world_path);
    st.set("ref", ref_path);
    const sim::TerrainMap world = load_world(world_path);
    eval::ReferencePath ref;
    try {
        ref = eval::load_reference(ref_path);
    } catch (const std::exception &e) {
        throw UsageError(std::string("bad reference file: ") + e.what());
    }
    eval::ControllerKind kind;
    try {
        kind = eval::parse_controller(st.required("controller"));
    } catch (const std::invalid_argument &e) {
        throw UsageError(e.what());
    }
    ikd::IkdModel model;
    eval::Controller ctl = eval::Controller::baseline();
    if (kind != eval::ControllerKind::baseline) {
        const std::string ckpt = st.existing_file("ckpt");
        st.set("ckpt", ckpt);
        try {
            model = ikd::IkdModel::load(ckpt);
        } catch (const FormatError &e) {
            throw UsageError(std::string("bad checkpoint: ") + e.what());
        }
        ctl = {kind, &model};
        try {
            ctl.validate();
        } catch (const std::invalid_argument &e) {
            throw UsageError(e.what());
        }
    }
    std::vector<double> speeds;
    for (const auto &s : split_list(st.required("speed"))) {
        try {
            speeds.push_back(std::stod(s));
        } catch (const std::logic_error &) {
            throw UsageError("--speed: bad value '" + s + "'");
        }
        if (!(speeds.back() > 0 && speeds.back() <= sim::kVMax))
            throw UsageError("--speed values must be in (0, 4]");
    }
    const auto seeds = parse_seeds(st.required("seeds"));
    eval::EpisodeConfig ec;
    ec.laps = st.positive("laps");
    ec.success_threshold = st.real("success_threshold");
    if (!(ec.success_threshold > 0))
        throw UsageError("--success-threshold must be positive");
    const int jobs = st.positive("jobs");
    const fs::path out = st.out_dir();

    struct Job {
        double speed;
        std::uint64_t seed;
    };
    std::vector<Job> jobs_list;
    for (double v : speeds)
        for (auto s : seeds)
            jobs_list.push_back({v, s});
    std::vector<eval::ResultRow> rows(jobs_list.size());
    const auto t0 = std::chrono::steady_clock::now();
    std::mutex io;
    ikd::detail::parallel_for(jobs_list.size(), jobs, [&](std::size_t i) {
        eval::EpisodeConfig c = ec;
        c.speed = jobs_list[i].speed;
        const auto r = eval::run_episode(world, ctl, ref, c, jobs_list[i].seed);
        rows[i] = eval::make_row(kind, c.speed, jobs_list[i].seed, c.laps, r, static_cast<int>(ref.turns.size()));
        std::lock_guard<std::mutex> lock(io);
        note("eval: " + std::string(eval::controller_name(kind)) + " v=" + fmt(c.speed) + " seed="
             + std::to_string(jobs_list[i].seed) + " hausdorff=" + fmt(r.hausdorff) + " turns "
             + std::to_string(r.successes()) + "/" + std::to_string(r.turns.size()));
    });
    eval::write_results_csv((out / "results.csv").string(), rows);
    st.write_resolved(out);
    note("eval: " + std::to_string(rows.size()) + " episodes in " + fmt(since(t0), 3) + " s -> "
         + (out / "results.csv").string());
    return 0;
}

// --- report ----------------------------------------------------------------------------

int run_report(Stage &st)
{
    std::vector<std::string> inputs;
    for (const auto &p : split_list(st.required("results"))) {
        fs::path path = p;
        if (fs::is_directory(path))
            path /= "results.csv";
        if (!fs::is_regular_file(path))
            throw UsageError("file not found: " + path.string());
        inputs.push_back(fs::absolute(path).string());
    }
    std::string joined;
    for (const auto &p : inputs)
        joined += (joined.empty() ? "" : ",") + p;
    st.set("results", joined);
    const fs::path out = st.out_dir();

    std::vector<eval::ResultRow> rows;
    for (const auto &p : inputs) {
        std::vector<eval::ResultRow> part;
        try {
            part = eval::read_results_csv(p);
        } catch (const std::runtime_error &e) {
            throw UsageError(e.what());
        }
        rows.insert(rows.end(), part.begin(), part.end());
    }
    if (rows.empty())
        throw UsageError("no result rows in the given tables");
    double table_speed = 0;
    if (st.str("speed").empty()) {
        for (const auto &r : rows)
            table_speed = std::max(table_speed, r.speed);
        st.set("speed", fmt(table_speed, 10));
    } else {
        table_speed = st.real("speed");
    }

    eval::write_results_csv((out / "results.csv").string(), rows);
    std::ofstream((out / "summary.csv")) << eval::summary_table(rows);
    std::ofstream((out / "success.csv")) << eval::success_table(rows, table_speed);
    std::ofstream((out / "hausdorff_vs_speed.svg")) << eval::hausdorff_plot_svg(rows);
    st.write_resolved(out);
    std::cout << "success counts at " << fmt(table_speed) << " m/s\n" << eval::success_table(rows, table_speed) << "\n"
              << eval::summary_table(rows);
    note("report: " + std::to_string(rows.size()) + " rows -> " + out.string());
    return 0;
}

void error_line(const std::string &stage, const char *kind, const std::string &msg)
{
    std::string m = msg;
    std::replace(m.begin(), m.end(), '\n', ' ');
    std::replace(m.begin(), m.end(), '"', '\'');
    std::cerr << "kinoforge: error stage=" << (stage.empty() ? "-" : stage) << " kind=" << kind << " message=\"" << m
              << "\"" << std::endl;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"kinoforge: visual-inertial inverse kinodynamics workbench"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");
    const Field out{"out", "", "output directory (default $KINOFORGE_OUT/<stage>)"};
    const Field jobs{"jobs", "1", "worker threads"};

    std::vector<std::unique_ptr<Stage>> stages;
    auto add = [&](const char *name, const char *help, std::vector<Field> f, int (*fn)(Stage &)) {
        stages.push_back(std::make_unique<Stage>(app, name, help, std::move(f)));
        return std::make_pair(stages.back().get(), fn);
    };
    std::vector<std::pair<Stage *, int (*)(Stage &)>> table{
        add("gen-world", "write a preset world, its route and the slow-drive reference",
            {{"preset", "two-terrain-oval", "two-terrain-oval | outdoor-mix | uniform"},
             {"seed", "1", "world texture and reference-drive seed"},
             {"ref_speed", "0.5", "reference drive speed, m/s"},
             out},
            run_gen_world),
        add("collect", "random teleoperation in a world",
            {{"world", "", "world file"},
             {"duration", "1200", "simulated seconds"},
             {"seed", "1", "run seed"},
             {"v_max", "4", "max commanded speed"},
             {"omega_max", "1.8", "max commanded |yaw rate|"},
             {"hold_min", "1", "shortest command hold, s"},
             {"hold_max", "3", "longest command hold, s"},
             {"max_trajectory", "120", "restart after this many seconds"},
             out},
            run_collect),
        add("build-samples", "latency-aligned training samples from logs",
            {{"logs", "", "directory written by collect"},
             {"k", "40", "inertial window length"},
             {"max_views", "3", "patches kept per sample"},
             {"min_valid", "0.5", "minimum valid fraction of a patch"},
             {"predict", "true", "center patches on the predicted location"},
             jobs,
             out},
            run_build),
        add("train", "train an IMU-only or visual-inertial model",
            {{"samples", "", "directory written by build-samples"},
             {"variant", "vi", "imu | vi"},
             {"epochs", "50", "passes over the training split"},
             {"batch", "64", "minibatch size"},
             {"lr", "0.0003", "Adam learning rate"},
             {"hidden", "64", "hidden width"},
             {"seed", "1", "initialization and shuffling seed"},
             {"split_seed", "1", "train/test split seed"},
             jobs,
             out},
            run_train),
        add("eval", "closed-loop tracking episodes",
            {{"world", "", "world file"},
             {"ref", "", "reference file"},
             {"controller", "baseline", "baseline | imu | vi"},
             {"ckpt", "", "checkpoint for imu / vi"},
             {"speed", "3.2", "target speed(s), comma separated"},
             {"laps", "1", "laps per episode"},
             {"seeds", "0..9", "A..B or a comma list"},
             {"success_threshold", "1.0", "max deviation in a successful turn, m"},
             jobs,
             out},
            run_eval),
        add("report", "tables and plot from eval results",
            {{"results", "", "results.csv files or eval directories, comma separated"},
             {"speed", "", "speed for the success table (default: highest)"},
             out},
            run_report),
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::string stage;
        for (const auto &[s, fn] : table)
            if (s->app()->parsed())
                stage = s->name();
        error_line(stage, "usage", e.what());
        return 2;
    }
    for (auto &[st, fn] : table) {
        if (!st->app()->parsed())
            continue;
        try {
            st->resolve();
            return fn(*st);
        } catch (const UsageError &e) {
            error_line(st->name(), "usage", e.what());
            return 2;
        } catch (const std::exception &e) {
            error_line(st->name(), "runtime", e.what());
            return 1;
        }
    }
    return 2;
}
