#pragma once

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "snrsel/classifier.hpp"
#include "snrsel/simulation.hpp"
#include "snrsel/types.hpp"
#include "snrsel/version.hpp"

namespace snrsel {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace detail {

inline void append_raw(std::string& out, const void* data, std::size_t size) {
    out.append(static_cast<const char*>(data), size);
}

template <typename T>
inline void append_scalar(std::string& out, T value) {
    append_raw(out, &value, sizeof(T));
}

// Cursor over an in-memory file image; every failure names the byte offset.
class BinaryReader {
public:
    BinaryReader(std::string bytes, std::string origin)
        : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

    template <typename T>
    T read(const char* what) {
        if (pos_ + sizeof(T) > bytes_.size())
            throw ParseError(origin_ + ": truncated while reading " + what + " at byte " +
                             std::to_string(pos_));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    void expect_magic(const char* magic) {
        if (pos_ + 4 > bytes_.size() || std::memcmp(bytes_.data() + pos_, magic, 4) != 0)
            throw ParseError(origin_ + ": bad magic, expected " + magic);
        pos_ += 4;
    }

    bool at_end() const { return pos_ == bytes_.size(); }
    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    const std::string& origin() const { return origin_; }

private:
    std::string bytes_;
    std::string origin_;
    std::size_t pos_ = 0;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

inline void spill(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(path + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(path + ": write failed");
}

inline std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

} // namespace detail

// ---- snrf dataset container ------------------------------------------------
// "SNRF", u32 version = 1, u64 n, u64 d, n*d float64 row-major, then either
// nothing (unlabeled), a u8 0 (explicitly unlabeled), or a u8 1 followed by
// n u32 labels. All fields little-endian.

inline std::string snrf_bytes(const DataMatrix& data) {
    data.validate();
    std::string out;
    out.reserve(24 + static_cast<std::size_t>(data.n() * data.dim()) * 8);
    detail::append_raw(out, "SNRF", 4);
    detail::append_scalar<std::uint32_t>(out, 1);
    detail::append_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(data.n()));
    detail::append_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(data.dim()));
    for (Index i = 0; i < data.n(); ++i)
        for (Index j = 0; j < data.dim(); ++j)
            detail::append_scalar<double>(out, data.values(i, j));
    if (data.labels) {
        detail::append_scalar<std::uint8_t>(out, 1);
        for (std::uint32_t label : *data.labels) detail::append_scalar<std::uint32_t>(out, label);
    }
    return out;
}

inline void write_snrf(const std::string& path, const DataMatrix& data) {
    detail::spill(path, snrf_bytes(data));
}

inline DataMatrix read_snrf_bytes(std::string bytes, const std::string& origin) {
    detail::BinaryReader reader(std::move(bytes), origin);
    reader.expect_magic("SNRF");
    const auto version = reader.read<std::uint32_t>("version");
    if (version != 1)
        throw ParseError(origin + ": unsupported version " + std::to_string(version));
    const auto n = reader.read<std::uint64_t>("row count");
    const auto d = reader.read<std::uint64_t>("column count");
    if (n < 1 || d < 1)
        throw ParseError(origin + ": empty matrix");
    if (reader.remaining() < n * d * 8)
        throw ParseError(origin + ": truncated value block");

    DataMatrix data;
    data.values.resize(static_cast<Index>(n), static_cast<Index>(d));
    for (std::uint64_t i = 0; i < n; ++i)
        for (std::uint64_t j = 0; j < d; ++j) {
            const double v = reader.read<double>("value");
            if (!std::isfinite(v))
                throw ParseError(origin + ": non-finite value at row " + std::to_string(i) +
                                 ", column " + std::to_string(j));
            data.values(static_cast<Index>(i), static_cast<Index>(j)) = v;
        }

    if (!reader.at_end()) {
        const auto flag = reader.read<std::uint8_t>("label flag");
        if (flag == 1) {
            std::vector<std::uint32_t> labels(n);
            for (std::uint64_t i = 0; i < n; ++i) labels[i] = reader.read<std::uint32_t>("label");
            data.labels = std::move(labels);
        } else if (flag != 0) {
            throw ParseError(origin + ": bad label flag " + std::to_string(flag));
        }
        if (!reader.at_end())
            throw ParseError(origin + ": trailing bytes after payload at byte " +
                             std::to_string(reader.position()));
    }
    return data;
}

inline DataMatrix read_snrf(const std::string& path) {
    return read_snrf_bytes(detail::slurp(path), path);
}

// ---- csv dataset -----------------------------------------------------------
// Comma separated, no header; the label column, when present, is last.

inline std::string csv_bytes(const DataMatrix& data) {
    data.validate();
    std::string out;
    for (Index i = 0; i < data.n(); ++i) {
        for (Index j = 0; j < data.dim(); ++j) {
            if (j > 0) out += ',';
            out += detail::format_double(data.values(i, j));
        }
        if (data.labels) {
            out += ',';
            out += std::to_string((*data.labels)[static_cast<std::size_t>(i)]);
        }
        out += '\n';
    }
    return out;
}

inline void write_csv(const std::string& path, const DataMatrix& data) {
    detail::spill(path, csv_bytes(data));
}

inline DataMatrix read_csv_bytes(const std::string& text, bool has_labels,
                                 const std::string& origin) {
    std::vector<std::vector<double>> rows;
    std::vector<std::uint32_t> labels;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> fields;
        std::size_t start = 0;
        std::size_t column = 0;
        while (start <= line.size()) {
            ++column;
            std::size_t end = line.find(',', start);
            if (end == std::string::npos) end = line.size();
            const std::string token = line.substr(start, end - start);
            char* parse_end = nullptr;
            const double v = std::strtod(token.c_str(), &parse_end);
            if (token.empty() || parse_end != token.c_str() + token.size())
                throw ParseError(origin + ": row " + std::to_string(line_no) + ", column " +
                                 std::to_string(column) + ": cannot parse '" + token + "'");
            if (!std::isfinite(v))
                throw ParseError(origin + ": row " + std::to_string(line_no) + ", column " +
                                 std::to_string(column) + ": non-finite value");
            fields.push_back(v);
            start = end + 1;
            if (end == line.size()) break;
        }
        if (has_labels) {
            if (fields.size() < 2)
                throw ParseError(origin + ": row " + std::to_string(line_no) +
                                 ": need at least one feature plus the label");
            const double raw = fields.back();
            fields.pop_back();
            if (raw < 0 || raw != std::floor(raw))
                throw ParseError(origin + ": row " + std::to_string(line_no) +
                                 ": label must be a non-negative integer");
            labels.push_back(static_cast<std::uint32_t>(raw));
        }
        if (!rows.empty() && fields.size() != rows.front().size())
            throw ParseError(origin + ": row " + std::to_string(line_no) + ": expected " +
                             std::to_string(rows.front().size()) + " columns, got " +
                             std::to_string(fields.size()));
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw ParseError(origin + ": no data rows");

    DataMatrix data;
    data.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.front().size(); ++j)
            data.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    if (has_labels) data.labels = std::move(labels);
    return data;
}

inline DataMatrix read_csv(const std::string& path, bool has_labels) {
    return read_csv_bytes(detail::slurp(path), has_labels, path);
}

// ---- snrm model container --------------------------------------------------
// "SNRM", u32 version = 1, u32 estimator tag, u64 d, u64 r, mean, loadings
// row-major, noise variances; float64 little-endian throughout.

inline std::string snrm_bytes(const LowRankModel& model) {
    std::string out;
    detail::append_raw(out, "SNRM", 4);
    detail::append_scalar<std::uint32_t>(out, 1);
    detail::append_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(model.tag));
    detail::append_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(model.dim()));
    detail::append_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(model.rank));
    for (Index i = 0; i < model.mean.size(); ++i) detail::append_scalar<double>(out, model.mean[i]);
    for (Index i = 0; i < model.loadings.rows(); ++i)
        for (Index j = 0; j < model.loadings.cols(); ++j)
            detail::append_scalar<double>(out, model.loadings(i, j));
    for (Index i = 0; i < model.noise_variances.size(); ++i)
        detail::append_scalar<double>(out, model.noise_variances[i]);
    return out;
}

inline void write_model(const std::string& path, const LowRankModel& model) {
    detail::spill(path, snrm_bytes(model));
}

inline LowRankModel read_model(const std::string& path) {
    detail::BinaryReader reader(detail::slurp(path), path);
    reader.expect_magic("SNRM");
    const auto version = reader.read<std::uint32_t>("version");
    if (version != 1)
        throw ParseError(path + ": unsupported version " + std::to_string(version));
    const auto tag = reader.read<std::uint32_t>("estimator tag");
    if (tag > 3) throw ParseError(path + ": bad estimator tag " + std::to_string(tag));
    const auto d = reader.read<std::uint64_t>("dimension");
    const auto r = reader.read<std::uint64_t>("rank");
    if (d < 1 || r < 1 || r > d)
        throw ParseError(path + ": inconsistent dimensions d=" + std::to_string(d) +
                         " r=" + std::to_string(r));
    LowRankModel model;
    model.tag = static_cast<EstimatorTag>(tag);
    model.rank = static_cast<Index>(r);
    model.mean.resize(static_cast<Index>(d));
    for (std::uint64_t i = 0; i < d; ++i) model.mean[static_cast<Index>(i)] = reader.read<double>("mean");
    model.loadings.resize(static_cast<Index>(d), static_cast<Index>(r));
    for (std::uint64_t i = 0; i < d; ++i)
        for (std::uint64_t j = 0; j < r; ++j)
            model.loadings(static_cast<Index>(i), static_cast<Index>(j)) = reader.read<double>("loading");
    model.noise_variances.resize(static_cast<Index>(d));
    for (std::uint64_t i = 0; i < d; ++i) {
        const double v = reader.read<double>("noise variance");
        if (!(v > 0.0))
            throw ParseError(path + ": non-positive noise variance at feature " + std::to_string(i));
        model.noise_variances[static_cast<Index>(i)] = v;
    }
    if (!reader.at_end())
        throw ParseError(path + ": trailing bytes after payload");
    return model;
}

// ---- report files ----------------------------------------------------------

inline std::string metadata_header(std::uint64_t seed, const std::string& extra = "") {
    std::string line = "# tool_version=" SNRSEL_VERSION_STRING " seed=" + std::to_string(seed);
    if (!extra.empty()) line += " " + extra;
    return line + "\n";
}

inline void write_ranking_csv(const std::string& path, const SnrRanking& ranking,
                              std::uint64_t seed) {
    std::string out = metadata_header(seed);
    out += "feature_index,snr,selected\n";
    for (Index i = 0; i < ranking.dim(); ++i) {
        out += std::to_string(i) + ',' + detail::format_double(ranking.snr[i]) + ',' +
               (ranking.is_selected(i) ? '1' : '0');
        out += '\n';
    }
    detail::spill(path, out);
}

inline void write_predictions_csv(const std::string& path,
                                  const std::vector<std::uint32_t>& predictions,
                                  const Matrix& scores, const std::vector<std::uint32_t>& class_ids,
                                  bool include_scores, std::uint64_t seed) {
    std::string out = metadata_header(seed);
    out += "row_index,predicted_class";
    if (include_scores)
        for (std::uint32_t id : class_ids) out += ",score_" + std::to_string(id);
    out += '\n';
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        out += std::to_string(i) + ',' + std::to_string(predictions[i]);
        if (include_scores)
            for (Index c = 0; c < scores.cols(); ++c)
                out += ',' + detail::format_double(scores(static_cast<Index>(i), c));
        out += '\n';
    }
    detail::spill(path, out);
}

// ---- simulation truth sidecar ----------------------------------------------

inline void write_truth_json(const std::string& path, const SimSpec& spec, const SimTruth& truth) {
    nlohmann::json doc;
    doc["tool_version"] = SNRSEL_VERSION_STRING;
    doc["seed"] = spec.seed;
    doc["n"] = spec.n;
    doc["d_noise"] = spec.d_noise;
    doc["r"] = spec.r;
    doc["snr_profile"] = spec.resolved_profile();
    std::vector<std::vector<double>> w_rows;
    for (Index i = 0; i < truth.W_true.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(truth.W_true.cols()));
        for (Index j = 0; j < truth.W_true.cols(); ++j) row[static_cast<std::size_t>(j)] = truth.W_true(i, j);
        w_rows.push_back(std::move(row));
    }
    doc["W_true"] = w_rows;
    doc["psi_true"] = std::vector<double>(truth.psi_true.data(),
                                          truth.psi_true.data() + truth.psi_true.size());
    doc["snr_true"] = std::vector<double>(truth.snr_true.data(),
                                          truth.snr_true.data() + truth.snr_true.size());
    doc["true_indices"] = truth.true_indices;
    detail::spill(path, doc.dump(2) + "\n");
}

// ---- classifier bank directory ----------------------------------------------
// One snrm file per class plus manifest.json naming ids, m, and the selected
// indices; the SNR vector itself is recomputed from the model on load.

inline void save_bank(const std::string& dir, const ClassifierBank& bank, std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["tool_version"] = SNRSEL_VERSION_STRING;
    manifest["seed"] = seed;
    manifest["classes"] = nlohmann::json::array();
    for (const auto& cls : bank.classes) {
        const std::string file = "class_" + std::to_string(cls.class_id) + ".snrm";
        write_model((fs::path(dir) / file).string(), cls.model);
        nlohmann::json entry;
        entry["class_id"] = cls.class_id;
        entry["m"] = cls.ranking.m;
        entry["selected"] = cls.ranking.selected;
        entry["model_file"] = file;
        manifest["classes"].push_back(std::move(entry));
    }
    detail::spill((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

inline ClassifierBank load_bank(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(detail::slurp(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path + ": " + e.what());
    }
    ClassifierBank bank;
    if (!manifest.contains("classes") || !manifest["classes"].is_array())
        throw ParseError(manifest_path + ": missing classes array");
    for (const auto& entry : manifest["classes"]) {
        std::uint32_t class_id;
        Index m;
        std::vector<Index> selected;
        std::string file;
        try {
            class_id = entry.at("class_id").get<std::uint32_t>();
            m = entry.at("m").get<Index>();
            selected = entry.at("selected").get<std::vector<Index>>();
            file = entry.at("model_file").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(manifest_path + ": " + e.what());
        }
        LowRankModel model = read_model((fs::path(dir) / file).string());
        if (static_cast<Index>(selected.size()) != m)
            throw ParseError(manifest_path + ": class " + std::to_string(class_id) +
                             ": selected size does not match m");
        SnrRanking ranking;
        ranking.snr = compute_snr(model);
        ranking.selected = selected;
        ranking.m = m;
        for (std::size_t k = 0; k < selected.size(); ++k) {
            if (selected[k] < 0 || selected[k] >= model.dim())
                throw ParseError(manifest_path + ": class " + std::to_string(class_id) +
                                 ": selected index out of range");
            if (k > 0 && selected[k] <= selected[k - 1])
                throw ParseError(manifest_path + ": class " + std::to_string(class_id) +
                                 ": selected indices must be strictly increasing");
        }
        bank.add_class(build_class_model(class_id, std::move(model), std::move(ranking)));
    }
    if (bank.empty()) throw ParseError(manifest_path + ": no classes");
    return bank;
}

} // namespace snrsel
