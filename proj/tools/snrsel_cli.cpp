// Command-line front end: simulate, fit, select, predict, experiment.
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "snrsel/snrsel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("SNRSEL_THREADS")) {
        const int parsed = std::atoi(env);
        if (parsed > 0) return parsed;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    try {
        return json::parse(snrsel::detail::slurp(path));
    } catch (const json::exception& e) {
        throw snrsel::PreconditionError("config " + path + ": " + e.what());
    } catch (const snrsel::ParseError& e) {
        throw snrsel::PreconditionError(e.what());
    }
}

std::vector<snrsel::EstimatorTag> parse_methods(const json& cfg) {
    std::vector<snrsel::EstimatorTag> methods;
    if (cfg.contains("methods")) {
        for (const auto& name : cfg.at("methods")) {
            try {
                methods.push_back(snrsel::estimator_from_string(name.get<std::string>()));
            } catch (const snrsel::ParseError& e) {
                throw snrsel::PreconditionError(std::string("config: ") + e.what());
            }
        }
        if (methods.empty())
            throw snrsel::PreconditionError("config: methods must not be empty");
    }
    return methods;
}

struct ExperimentArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int runs = 0;
    int threads = 0;
};

void add_experiment_overrides(CLI::App* cmd, ExperimentArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config, keys mirror the flags");
    cmd->add_option("--out-dir", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", args.seed, "master seed (overrides config)")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--runs", args.runs, "runs per cell (overrides config)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--threads", args.threads, "worker threads (overrides config and SNRSEL_THREADS)")
        ->check(CLI::PositiveNumber);
}

fs::path resolve_out_dir(const ExperimentArgs& args, const json& cfg) {
    std::string dir = args.out_dir;
    if (dir.empty() && cfg.contains("out_dir")) dir = cfg.at("out_dir").get<std::string>();
    if (dir.empty()) dir = ".";
    fs::create_directories(dir);
    return dir;
}

int run_recovery_grid_cmd(const ExperimentArgs& args) {
    const json cfg = load_config(args.config_path);
    snrsel::GridSpec spec;
    if (cfg.contains("n_values")) spec.n_values = cfg.at("n_values").get<std::vector<snrsel::Index>>();
    if (cfg.contains("noise_values"))
        spec.noise_values = cfg.at("noise_values").get<std::vector<snrsel::Index>>();
    if (auto methods = parse_methods(cfg); !methods.empty()) spec.methods = methods;
    if (cfg.contains("runs")) spec.runs = cfg.at("runs").get<int>();
    if (cfg.contains("seed")) spec.seed = cfg.at("seed").get<std::uint64_t>();
    if (cfg.contains("rank")) spec.rank = cfg.at("rank").get<snrsel::Index>();
    if (cfg.contains("threads")) spec.threads = cfg.at("threads").get<int>();
    if (cfg.contains("fit_tol")) spec.fit_tol = cfg.at("fit_tol").get<double>();
    if (args.seed_set) spec.seed = args.seed;
    if (args.runs > 0) spec.runs = args.runs;
    spec.threads = resolve_threads(args.threads > 0 ? args.threads : spec.threads);

    const auto cells = snrsel::run_recovery_grid(spec);
    const fs::path out = resolve_out_dir(args, cfg) / "recovery_grid.csv";
    snrsel::write_recovery_csv(out.string(), cells, spec);
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

snrsel::CurveSpec curve_spec_from(const json& cfg, const ExperimentArgs& args) {
    snrsel::CurveSpec spec;
    if (cfg.contains("n_values")) spec.n_values = cfg.at("n_values").get<std::vector<snrsel::Index>>();
    if (auto methods = parse_methods(cfg); !methods.empty()) spec.methods = methods;
    if (cfg.contains("d_noise")) spec.d_noise = cfg.at("d_noise").get<snrsel::Index>();
    if (cfg.contains("runs")) spec.runs = cfg.at("runs").get<int>();
    if (cfg.contains("seed")) spec.seed = cfg.at("seed").get<std::uint64_t>();
    if (cfg.contains("rank")) spec.rank = cfg.at("rank").get<snrsel::Index>();
    if (cfg.contains("threads")) spec.threads = cfg.at("threads").get<int>();
    if (cfg.contains("fit_tol")) spec.fit_tol = cfg.at("fit_tol").get<double>();
    if (args.seed_set) spec.seed = args.seed;
    if (args.runs > 0) spec.runs = args.runs;
    spec.threads = resolve_threads(args.threads > 0 ? args.threads : spec.threads);
    return spec;
}

int run_estimation_curves_cmd(const ExperimentArgs& args) {
    const json cfg = load_config(args.config_path);
    const snrsel::CurveSpec spec = curve_spec_from(cfg, args);
    const snrsel::Index trace_n =
        cfg.contains("trace_n") ? cfg.at("trace_n").get<snrsel::Index>() : snrsel::Index{1000};

    const auto points = snrsel::run_estimation_curves(spec);
    const fs::path dir = resolve_out_dir(args, cfg);
    snrsel::write_curves_csv((dir / "estimation_curves.csv").string(), points, spec);
    const auto trace = snrsel::run_iteration_trace(spec, trace_n);
    snrsel::write_trace_csv((dir / "iteration_trace.csv").string(), trace, spec, trace_n);
    std::cout << "wrote " << (dir / "estimation_curves.csv").string() << " and "
              << (dir / "iteration_trace.csv").string() << "\n";
    return 0;
}

int run_sweep_cmd(const ExperimentArgs& args) {
    const json cfg = load_config(args.config_path);
    for (const char* key : {"train", "test", "method", "m_values"})
        if (!cfg.contains(key))
            throw snrsel::PreconditionError(std::string("config: sweep requires '") + key + "'");
    const auto train = snrsel::read_snrf(cfg.at("train").get<std::string>());
    const auto test = snrsel::read_snrf(cfg.at("test").get<std::string>());
    const auto method = snrsel::estimator_from_string(cfg.at("method").get<std::string>());
    const auto m_values = cfg.at("m_values").get<std::vector<snrsel::Index>>();
    const snrsel::Index rank = cfg.contains("rank") ? cfg.at("rank").get<snrsel::Index>() : 3;
    const std::uint64_t seed =
        args.seed_set ? args.seed : (cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>() : 0);

    const auto points = snrsel::run_classification_sweep(train, test, method, m_values, rank);
    const fs::path out = resolve_out_dir(args, cfg) / "sweep_accuracy.csv";
    snrsel::write_sweep_csv(out.string(), points, method, seed);
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

int run_timing_cmd(const ExperimentArgs& args) {
    const json cfg = load_config(args.config_path);
    snrsel::SimSpec sim;
    if (cfg.contains("n")) sim.n = cfg.at("n").get<snrsel::Index>();
    if (cfg.contains("d_noise")) sim.d_noise = cfg.at("d_noise").get<snrsel::Index>();
    if (cfg.contains("seed")) sim.seed = cfg.at("seed").get<std::uint64_t>();
    if (args.seed_set) sim.seed = args.seed;
    const snrsel::Index rank = cfg.contains("rank") ? cfg.at("rank").get<snrsel::Index>() : 3;
    const int repeats = cfg.contains("repeats") ? cfg.at("repeats").get<int>() : 3;
    std::vector<snrsel::EstimatorTag> methods = parse_methods(cfg);
    if (methods.empty())
        methods = {snrsel::EstimatorTag::ppca, snrsel::EstimatorTag::lfa, snrsel::EstimatorTag::elf,
                   snrsel::EstimatorTag::heteropca};

    auto [data, truth] = snrsel::generate(sim);
    (void)truth;
    const auto entries = snrsel::timing_report(snrsel::center(data), methods, rank, repeats);
    const fs::path out = resolve_out_dir(args, cfg) / "timings.json";
    snrsel::write_timings_json(out.string(), entries, sim.seed, repeats);
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SNR-based per-class feature selection over low-rank generative models"};
    app.set_version_flag("--version", SNRSEL_VERSION_STRING);
    app.require_subcommand(1);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "generate synthetic data with known truth");
    snrsel::SimSpec sim;
    std::string sim_out;
    std::vector<double> sim_profile;
    simulate->add_option("--n", sim.n, "observations")->required()->check(CLI::Range(2, 1 << 26));
    simulate->add_option("--d-noise", sim.d_noise, "pure-noise feature count")
        ->required()
        ->check(CLI::NonNegativeNumber);
    simulate->add_option("--r", sim.r, "latent rank")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim.seed, "seed");
    simulate->add_option("--snr-profile", sim_profile, "10 signal SNR values")->expected(10);
    simulate->add_option("--out", sim_out, "output directory")->required();
    simulate->callback([&] {
        sim.snr_profile = sim_profile;
        auto [data, truth] = snrsel::generate(sim);
        fs::create_directories(sim_out);
        snrsel::write_snrf((fs::path(sim_out) / "data.snrf").string(), data);
        snrsel::write_truth_json((fs::path(sim_out) / "truth.json").string(), sim, truth);
        std::cout << "wrote " << (fs::path(sim_out) / "data.snrf").string() << "\n";
    });

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit a low-rank model (one file, or one per class)");
    std::string fit_in, fit_out, fit_method;
    snrsel::FitOptions fit_opts;
    snrsel::Index fit_m = 0;
    bool per_class = false;
    fit_cmd->add_option("--in", fit_in, "input snrf dataset")->required();
    fit_cmd->add_option("--method", fit_method, "ppca|lfa|elf|heteropca")
        ->required()
        ->check(CLI::IsMember({"ppca", "lfa", "elf", "heteropca"}));
    fit_cmd->add_option("--rank", fit_opts.rank, "latent rank")->required()->check(CLI::PositiveNumber);
    fit_cmd->add_option("--max-iters", fit_opts.max_iters, "iteration cap, 0 = method default")
        ->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--tol", fit_opts.tol, "convergence tolerance");
    fit_cmd->add_option("--floor", fit_opts.variance_floor, "variance floor, 0 = auto");
    fit_cmd->add_flag("--per-class", per_class, "fit one model per label; --out is a bank directory");
    fit_cmd->add_option("--m", fit_m, "with --per-class: features per class in the bank manifest (default all)")
        ->check(CLI::PositiveNumber);
    fit_cmd->add_option("--out", fit_out, "output snrm file (or bank directory with --per-class)")->required();
    fit_cmd->callback([&] {
        const auto tag = snrsel::estimator_from_string(fit_method);
        const auto data = snrsel::read_snrf(fit_in);
        if (per_class) {
            snrsel::ClassifierBank bank;
            for (auto& [class_id, part] : snrsel::partition_by_class(data)) {
                auto model = snrsel::fit(tag, snrsel::center(part), fit_opts);
                auto ranking = snrsel::select_top_m(model, fit_m > 0 ? fit_m : model.dim());
                bank.add_class(snrsel::build_class_model(class_id, std::move(model), std::move(ranking)));
            }
            snrsel::save_bank(fit_out, bank, 0);
        } else {
            const auto model = snrsel::fit(tag, snrsel::center(data), fit_opts);
            snrsel::write_model(fit_out, model);
        }
        std::cout << "wrote " << fit_out << "\n";
    });

    // select
    auto* select = app.add_subcommand("select", "rank features by SNR and keep the top m");
    std::string sel_model, sel_out;
    snrsel::Index sel_m = 0;
    select->add_option("--model", sel_model, "input snrm model")->required();
    select->add_option("--m", sel_m, "features to keep")->required()->check(CLI::PositiveNumber);
    select->add_option("--out", sel_out, "output ranking csv")->required();
    select->callback([&] {
        const auto model = snrsel::read_model(sel_model);
        const auto ranking = snrsel::select_top_m(model, sel_m);
        snrsel::write_ranking_csv(sel_out, ranking, 0);
        std::cout << "wrote " << sel_out << "\n";
    });

    // predict
    auto* predict = app.add_subcommand("predict", "classify rows against a bank directory");
    std::string pred_bank, pred_in, pred_out;
    bool pred_scores = false;
    predict->add_option("--bank", pred_bank, "bank directory (snrm files + manifest.json)")->required();
    predict->add_option("--in", pred_in, "input snrf dataset")->required();
    predict->add_option("--out", pred_out, "output predictions csv")->required();
    predict->add_flag("--scores", pred_scores, "include per-class scores");
    predict->callback([&] {
        const auto bank = snrsel::load_bank(pred_bank);
        const auto data = snrsel::read_snrf(pred_in);
        std::vector<std::uint32_t> ids;
        for (const auto& cls : bank.classes) ids.push_back(cls.class_id);
        std::vector<std::uint32_t> predictions(static_cast<std::size_t>(data.n()));
        snrsel::Matrix scores(data.n(), static_cast<snrsel::Index>(bank.classes.size()));
        for (snrsel::Index i = 0; i < data.n(); ++i) {
            auto [label, row_scores] = bank.predict_scored(data.values.row(i).transpose());
            predictions[static_cast<std::size_t>(i)] = label;
            scores.row(i) = row_scores.transpose();
        }
        snrsel::write_predictions_csv(pred_out, predictions, scores, ids, pred_scores, 0);
        std::cout << "wrote " << pred_out << "\n";
    });

    // experiment
    auto* experiment = app.add_subcommand("experiment", "run an evaluation and emit report files");
    experiment->require_subcommand(1);
    ExperimentArgs grid_args, curves_args, sweep_args, timing_args;
    auto* grid = experiment->add_subcommand("recovery-grid", "feature-recovery accuracy grid");
    add_experiment_overrides(grid, grid_args);
    grid->callback([&] { run_recovery_grid_cmd(grid_args); });
    auto* curves = experiment->add_subcommand("estimation-curves", "estimation-error curves and iteration trace");
    add_experiment_overrides(curves, curves_args);
    curves->callback([&] { run_estimation_curves_cmd(curves_args); });
    auto* sweep = experiment->add_subcommand("sweep", "classification accuracy per selected-feature count");
    add_experiment_overrides(sweep, sweep_args);
    sweep->callback([&] { run_sweep_cmd(sweep_args); });
    auto* timing = experiment->add_subcommand("timing", "wall-clock fit and ranking cost (informational)");
    add_experiment_overrides(timing, timing_args);
    timing->callback([&] { run_timing_cmd(timing_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const snrsel::PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const snrsel::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
