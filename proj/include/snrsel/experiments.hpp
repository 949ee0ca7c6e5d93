#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "snrsel/data_io.hpp"
#include "snrsel/estimators.hpp"
#include "snrsel/simulation.hpp"
#include "snrsel/snr.hpp"

namespace snrsel {

namespace detail {

// Work pool over an index range. Each task writes only its own result slot,
// so the reduction order (and therefore every output) is independent of the
// thread count.
template <typename Fn>
inline void parallel_for(std::size_t count, int threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Per-run dataset seed; depends on the grid coordinates but never on the
// method, so all methods see identical datasets (common random numbers).
inline std::uint64_t run_seed(std::uint64_t master, Index n, Index d_noise, int run) {
    std::uint64_t s = mix_seed(master, static_cast<std::uint64_t>(n));
    s = mix_seed(s, static_cast<std::uint64_t>(d_noise));
    return mix_seed(s, static_cast<std::uint64_t>(run));
}

} // namespace detail

// ---- feature-recovery grid ---------------------------------------------------

struct GridSpec {
    std::vector<Index> n_values{50, 100, 300, 1000};
    std::vector<Index> noise_values{10, 50, 100};
    std::vector<EstimatorTag> methods{EstimatorTag::ppca, EstimatorTag::lfa,
                                      EstimatorTag::elf, EstimatorTag::heteropca};
    int runs = 50;
    std::uint64_t seed = 42;
    int threads = 1;
    Index rank = 3;
    // Evaluation fits run far tighter than the FitOptions default so that cell
    // accuracies measure the estimators, not the early-stop heuristic.
    double fit_tol = 1e-10;

    void validate() const {
        if (runs < 1) throw PreconditionError("GridSpec: runs must be at least 1");
        if (n_values.empty() || noise_values.empty() || methods.empty())
            throw PreconditionError("GridSpec: empty axis");
        if (!(fit_tol > 0.0)) throw PreconditionError("GridSpec: fit_tol must be positive");
    }
};

struct GridCell {
    EstimatorTag method;
    Index n = 0;
    Index d_noise = 0;
    double acc_pct = 0.0;
    double std_err_pct = 0.0;
    int failures = 0;
};

// Average recovery accuracy of the 10 true features over repeated draws, for
// every (method, n, d_noise) cell. Fit failures are counted per cell and the
// cell mean is taken over the remaining runs.
inline std::vector<GridCell> run_recovery_grid(const GridSpec& spec) {
    spec.validate();
    const std::size_t n_count = spec.n_values.size();
    const std::size_t noise_count = spec.noise_values.size();
    const std::size_t method_count = spec.methods.size();
    const std::size_t runs = static_cast<std::size_t>(spec.runs);
    const std::size_t tasks = n_count * noise_count * runs;

    constexpr double kFailure = -1.0;
    std::vector<double> acc(tasks * method_count, kFailure);

    detail::parallel_for(tasks, spec.threads, [&](std::size_t task) {
        const std::size_t run = task % runs;
        const std::size_t noise_idx = (task / runs) % noise_count;
        const std::size_t n_idx = task / (runs * noise_count);

        SimSpec sim;
        sim.n = spec.n_values[n_idx];
        sim.d_noise = spec.noise_values[noise_idx];
        sim.r = spec.rank;
        sim.seed = detail::run_seed(spec.seed, sim.n, sim.d_noise, static_cast<int>(run));
        auto [data, truth] = generate(sim);
        const CenteredData centered = center(data);

        FitOptions opts;
        opts.rank = spec.rank;
        opts.tol = spec.fit_tol;
        for (std::size_t mi = 0; mi < method_count; ++mi) {
            double value = kFailure;
            try {
                const LowRankModel model = fit(spec.methods[mi], centered, opts);
                const SnrRanking ranking = select_top_m(model, kSignalFeatures);
                value = recovery_accuracy(truth.true_indices, ranking.selected);
            } catch (const Error&) {
            }
            acc[task * method_count + mi] = value;
        }
    });

    std::vector<GridCell> cells;
    for (std::size_t mi = 0; mi < method_count; ++mi)
        for (std::size_t n_idx = 0; n_idx < n_count; ++n_idx)
            for (std::size_t noise_idx = 0; noise_idx < noise_count; ++noise_idx) {
                GridCell cell;
                cell.method = spec.methods[mi];
                cell.n = spec.n_values[n_idx];
                cell.d_noise = spec.noise_values[noise_idx];
                double sum = 0.0, sum_sq = 0.0;
                int ok = 0;
                for (std::size_t run = 0; run < runs; ++run) {
                    const std::size_t task = (n_idx * noise_count + noise_idx) * runs + run;
                    const double value = acc[task * method_count + mi];
                    if (value == kFailure) {
                        ++cell.failures;
                        continue;
                    }
                    sum += value;
                    sum_sq += value * value;
                    ++ok;
                }
                if (ok > 0) {
                    const double mean = sum / ok;
                    const double variance = std::max(sum_sq / ok - mean * mean, 0.0);
                    cell.acc_pct = 100.0 * mean;
                    cell.std_err_pct = 100.0 * std::sqrt(variance / ok);
                }
                cells.push_back(cell);
            }
    return cells;
}

inline void write_recovery_csv(const std::string& path, const std::vector<GridCell>& cells,
                               const GridSpec& spec) {
    std::string out = metadata_header(spec.seed, "runs=" + std::to_string(spec.runs));
    out += "method,n,d_noise,acc_pct,std_err_pct,failures\n";
    for (const auto& cell : cells) {
        out += std::string(to_string(cell.method)) + ',' + std::to_string(cell.n) + ',' +
               std::to_string(cell.d_noise) + ',' + detail::format_double(cell.acc_pct) + ',' +
               detail::format_double(cell.std_err_pct) + ',' + std::to_string(cell.failures) + '\n';
    }
    detail::spill(path, out);
}

// ---- estimation-error curves --------------------------------------------------

struct CurveSpec {
    std::vector<Index> n_values{50, 100, 300, 1000};
    std::vector<EstimatorTag> methods{EstimatorTag::ppca, EstimatorTag::lfa,
                                      EstimatorTag::elf, EstimatorTag::heteropca};
    Index d_noise = 100;
    int runs = 50;
    std::uint64_t seed = 42;
    int threads = 1;
    Index rank = 3;
    double fit_tol = 1e-10;    // see GridSpec::fit_tol
};

struct CurvePoint {
    EstimatorTag method;
    Index n = 0;
    double mad_sig = 0.0;
    double mad_psi = 0.0;
    double mad_snr = 0.0;
    int failures = 0;
};

// Mean absolute deviation of the estimated signal strengths, noise variances,
// and SNRs against the generator's truth, averaged over runs.
inline std::vector<CurvePoint> run_estimation_curves(const CurveSpec& spec) {
    if (spec.runs < 1) throw PreconditionError("CurveSpec: runs must be at least 1");
    const std::size_t n_count = spec.n_values.size();
    const std::size_t method_count = spec.methods.size();
    const std::size_t runs = static_cast<std::size_t>(spec.runs);
    const std::size_t tasks = n_count * runs;

    struct RunErrors {
        double sig = -1.0, psi = -1.0, snr = -1.0;
    };
    std::vector<RunErrors> errors(tasks * method_count);

    detail::parallel_for(tasks, spec.threads, [&](std::size_t task) {
        const std::size_t run = task % runs;
        const std::size_t n_idx = task / runs;

        SimSpec sim;
        sim.n = spec.n_values[n_idx];
        sim.d_noise = spec.d_noise;
        sim.r = spec.rank;
        sim.seed = detail::run_seed(spec.seed, sim.n, sim.d_noise, static_cast<int>(run));
        auto [data, truth] = generate(sim);
        const CenteredData centered = center(data);
        const Vector sig_true = truth.W_true.rowwise().squaredNorm();

        FitOptions opts;
        opts.rank = spec.rank;
        opts.tol = spec.fit_tol;
        for (std::size_t mi = 0; mi < method_count; ++mi) {
            RunErrors& slot = errors[task * method_count + mi];
            try {
                const LowRankModel model = fit(spec.methods[mi], centered, opts);
                slot.sig = mad(model.loadings.rowwise().squaredNorm(), sig_true);
                slot.psi = mad(model.noise_variances, truth.psi_true);
                slot.snr = mad(compute_snr(model), truth.snr_true);
            } catch (const Error&) {
            }
        }
    });

    std::vector<CurvePoint> points;
    for (std::size_t mi = 0; mi < method_count; ++mi)
        for (std::size_t n_idx = 0; n_idx < n_count; ++n_idx) {
            CurvePoint point;
            point.method = spec.methods[mi];
            point.n = spec.n_values[n_idx];
            double sig = 0.0, psi = 0.0, snr = 0.0;
            int ok = 0;
            for (std::size_t run = 0; run < runs; ++run) {
                const RunErrors& slot = errors[(n_idx * runs + run) * method_count + mi];
                if (slot.sig < 0.0) {
                    ++point.failures;
                    continue;
                }
                sig += slot.sig;
                psi += slot.psi;
                snr += slot.snr;
                ++ok;
            }
            if (ok > 0) {
                point.mad_sig = sig / ok;
                point.mad_psi = psi / ok;
                point.mad_snr = snr / ok;
            }
            points.push_back(point);
        }
    return points;
}

inline void write_curves_csv(const std::string& path, const std::vector<CurvePoint>& points,
                             const CurveSpec& spec) {
    std::string out = metadata_header(spec.seed, "runs=" + std::to_string(spec.runs) +
                                                     " d_noise=" + std::to_string(spec.d_noise));
    out += "method,n,mad_sig,mad_psi,mad_snr,failures\n";
    for (const auto& p : points) {
        out += std::string(to_string(p.method)) + ',' + std::to_string(p.n) + ',' +
               detail::format_double(p.mad_sig) + ',' + detail::format_double(p.mad_psi) + ',' +
               detail::format_double(p.mad_snr) + ',' + std::to_string(p.failures) + '\n';
    }
    detail::spill(path, out);
}

struct TracePoint {
    EstimatorTag method;
    Index iteration = 0;
    double mad_sig = 0.0;
    double mad_psi = 0.0;
    double mad_snr = 0.0;
};

// Per-iteration estimation error on one dataset, for the iterative fitters
// that expose a loadings path (lfa and elf).
inline std::vector<TracePoint> run_iteration_trace(const CurveSpec& spec, Index n) {
    SimSpec sim;
    sim.n = n;
    sim.d_noise = spec.d_noise;
    sim.r = spec.rank;
    sim.seed = detail::run_seed(spec.seed, n, spec.d_noise, 0);
    auto [data, truth] = generate(sim);
    const CenteredData centered = center(data);
    const Vector sig_true = truth.W_true.rowwise().squaredNorm();

    std::vector<TracePoint> points;
    for (EstimatorTag tag : spec.methods) {
        if (tag != EstimatorTag::lfa && tag != EstimatorTag::elf) continue;
        FitOptions opts;
        opts.rank = spec.rank;
        opts.tol = spec.fit_tol;
        FitTrace trace;
        fit(tag, centered, opts, &trace);
        for (std::size_t t = 0; t < trace.loadings_path.size(); ++t) {
            TracePoint point;
            point.method = tag;
            point.iteration = static_cast<Index>(t + 1);
            const Vector sig_hat = trace.loadings_path[t].rowwise().squaredNorm();
            const Vector& psi_hat = trace.noise_path[t];
            point.mad_sig = mad(sig_hat, sig_true);
            point.mad_psi = mad(psi_hat, truth.psi_true);
            point.mad_snr = mad((sig_hat.array() / psi_hat.array()).matrix(), truth.snr_true);
            points.push_back(point);
        }
    }
    return points;
}

inline void write_trace_csv(const std::string& path, const std::vector<TracePoint>& points,
                            const CurveSpec& spec, Index n) {
    std::string out = metadata_header(spec.seed, "n=" + std::to_string(n) +
                                                     " d_noise=" + std::to_string(spec.d_noise));
    out += "method,iteration,mad_sig,mad_psi,mad_snr\n";
    for (const auto& p : points) {
        out += std::string(to_string(p.method)) + ',' + std::to_string(p.iteration) + ',' +
               detail::format_double(p.mad_sig) + ',' + detail::format_double(p.mad_psi) + ',' +
               detail::format_double(p.mad_snr) + '\n';
    }
    detail::spill(path, out);
}

// ---- classification sweep ------------------------------------------------------

struct SweepPoint {
    Index m = 0;
    double accuracy_pct = 0.0;
};

// Fits one model per training class, then reuses the per-class SNR rankings
// to evaluate test accuracy at every requested m without refitting.
inline std::vector<SweepPoint> run_classification_sweep(const DataMatrix& train,
                                                        const DataMatrix& test,
                                                        EstimatorTag method,
                                                        const std::vector<Index>& m_values,
                                                        Index rank) {
    train.validate();
    test.validate();
    if (!train.labels || !test.labels)
        throw PreconditionError("run_classification_sweep: train and test must be labeled");
    if (train.dim() != test.dim())
        throw PreconditionError("run_classification_sweep: train/test dimension mismatch");
    if (m_values.empty())
        throw PreconditionError("run_classification_sweep: no m values");

    struct Fitted {
        std::uint32_t class_id;
        LowRankModel model;
        Vector snr;
    };
    std::vector<Fitted> fitted;
    for (auto& [class_id, part] : partition_by_class(train)) {
        if (part.n() <= rank)
            throw PreconditionError("run_classification_sweep: class " + std::to_string(class_id) +
                                    " has fewer than rank+1 samples");
        FitOptions opts;
        opts.rank = rank;
        try {
            LowRankModel model = fit(method, center(part), opts);
            Vector snr = compute_snr(model);
            fitted.push_back({class_id, std::move(model), std::move(snr)});
        } catch (const Error& e) {
            throw Error("class " + std::to_string(class_id) + ": " + e.what());
        }
    }

    std::vector<SweepPoint> points;
    for (Index m : m_values) {
        ClassifierBank bank;
        for (const auto& f : fitted)
            bank.add_class(build_class_model(f.class_id, f.model, select_top_m(f.snr, m)));
        const std::vector<std::uint32_t> predicted = bank.predict_batch(test.values);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < predicted.size(); ++i)
            if (predicted[i] == (*test.labels)[i]) ++hits;
        points.push_back({m, 100.0 * static_cast<double>(hits) /
                                 static_cast<double>(predicted.size())});
    }
    return points;
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepPoint>& points,
                            EstimatorTag method, std::uint64_t seed) {
    std::string out = metadata_header(seed, std::string("method=") + to_string(method));
    out += "m,accuracy_pct\n";
    for (const auto& p : points)
        out += std::to_string(p.m) + ',' + detail::format_double(p.accuracy_pct) + '\n';
    detail::spill(path, out);
}

// ---- timing report ---------------------------------------------------------------

struct TimingEntry {
    EstimatorTag method;
    double fit_seconds_mean = 0.0;
    double fit_seconds_cv = 0.0;   // coefficient of variation over repeats
    double snr_seconds_mean = 0.0;
};

// Wall-clock cost of fit plus SNR ranking per method. Informational only.
inline std::vector<TimingEntry> timing_report(const CenteredData& data,
                                              const std::vector<EstimatorTag>& methods,
                                              Index rank, int repeats) {
    if (repeats < 1) throw PreconditionError("timing_report: repeats must be at least 1");
    using clock = std::chrono::steady_clock;
    std::vector<TimingEntry> entries;
    for (EstimatorTag tag : methods) {
        TimingEntry entry;
        entry.method = tag;
        std::vector<double> fit_times;
        double snr_total = 0.0;
        FitOptions opts;
        opts.rank = rank;
        for (int rep = 0; rep < repeats; ++rep) {
            const auto t0 = clock::now();
            const LowRankModel model = fit(tag, data, opts);
            const auto t1 = clock::now();
            const Vector snr = compute_snr(model);
            const auto t2 = clock::now();
            fit_times.push_back(std::chrono::duration<double>(t1 - t0).count());
            snr_total += std::chrono::duration<double>(t2 - t1).count();
            (void)snr;
        }
        double mean = 0.0;
        for (double t : fit_times) mean += t;
        mean /= fit_times.size();
        double variance = 0.0;
        for (double t : fit_times) variance += (t - mean) * (t - mean);
        variance /= fit_times.size();
        entry.fit_seconds_mean = mean;
        entry.fit_seconds_cv = mean > 0.0 ? std::sqrt(variance) / mean : 0.0;
        entry.snr_seconds_mean = snr_total / repeats;
        entries.push_back(entry);
    }
    return entries;
}

inline void write_timings_json(const std::string& path, const std::vector<TimingEntry>& entries,
                               std::uint64_t seed, int repeats) {
    nlohmann::json doc;
    doc["tool_version"] = SNRSEL_VERSION_STRING;
    doc["seed"] = seed;
    doc["repeats"] = repeats;
    doc["entries"] = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json entry;
        entry["method"] = to_string(e.method);
        entry["fit_seconds_mean"] = e.fit_seconds_mean;
        entry["fit_seconds_cv"] = e.fit_seconds_cv;
        entry["snr_seconds_mean"] = e.snr_seconds_mean;
        doc["entries"].push_back(std::move(entry));
    }
    detail::spill(path, doc.dump(2) + "\n");
}

} // namespace snrsel
