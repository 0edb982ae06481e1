#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "labelfuse/core.hpp"
#include "labelfuse/errors.hpp"
#include "labelfuse/matrix.hpp"

// CSV and number formatting. All numbers go through to_chars/from_chars:
// locale-independent, and doubles round-trip bit-exactly via the shortest
// representation.

namespace labelfuse {

inline std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return {buf, res.ptr};
}

inline bool try_parse_double(std::string_view text, double& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc{} && res.ptr == last;
}

inline bool try_parse_size(std::string_view text, std::size_t& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc{} && res.ptr == last;
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields.emplace_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return fields;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Dataset files: header row, numeric feature columns, optional label column.

inline Dataset load_dataset_csv(const std::string& path,
                                const std::optional<std::string>& label_column) {
    std::vector<std::string> lines = detail::read_lines(path);
    if (lines.empty()) throw EmptyFile("dataset file is empty: " + path);
    std::vector<std::string> header = detail::split_csv_line(lines[0]);
    if (lines.size() < 2) throw EmptyFile("dataset file has no data rows: " + path);

    std::size_t label_idx = header.size();
    if (label_column) {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == *label_column) { label_idx = c; break; }
        if (label_idx == header.size())
            throw MissingColumn("label column not found: " + *label_column);
    }

    const std::size_t n = lines.size() - 1;
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != label_idx) feature_cols.push_back(c);

    Dataset ds;
    ds.features = Matrix(n, feature_cols.size());
    std::vector<std::string> raw_labels(label_column ? n : 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> fields = detail::split_csv_line(lines[i + 1]);
        if (fields.size() != header.size())
            throw IoError("row " + std::to_string(i + 1) + " has wrong field count");
        for (std::size_t f = 0; f < feature_cols.size(); ++f) {
            double v;
            if (!try_parse_double(fields[feature_cols[f]], v) || !std::isfinite(v))
                throw NonNumericFeature("non-numeric value in column " + header[feature_cols[f]] +
                                        " row " + std::to_string(i + 1));
            ds.features(i, f) = v;
        }
        if (label_column) raw_labels[i] = fields[label_idx];
    }

    // Min-max scale each feature column; constant columns map to 0.
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
        double lo = ds.features(0, f), hi = ds.features(0, f);
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, ds.features(i, f));
            hi = std::max(hi, ds.features(i, f));
        }
        double range = hi - lo;
        for (std::size_t i = 0; i < n; ++i)
            ds.features(i, f) = range > 0.0 ? (ds.features(i, f) - lo) / range : 0.0;
    }

    if (label_column) {
        // Dense class indices in order of first occurrence.
        std::unordered_map<std::string, std::size_t> mapping;
        std::vector<std::size_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto [it, inserted] = mapping.try_emplace(raw_labels[i], ds.label_names.size());
            if (inserted) ds.label_names.push_back(raw_labels[i]);
            labels[i] = it->second;
        }
        ds.true_labels = std::move(labels);
        ds.n_classes = ds.label_names.size();
    }

    ds.sample_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) ds.sample_ids[i] = std::to_string(i);
    return ds;
}

inline void write_dataset_csv(const Dataset& dataset, const std::string& path,
                              const std::string& label_column = "label") {
    std::ostringstream out;
    const std::size_t d = dataset.features.cols();
    for (std::size_t f = 0; f < d; ++f) out << "f" << f << ",";
    out << label_column << "\n";
    for (std::size_t i = 0; i < dataset.features.rows(); ++i) {
        for (std::size_t f = 0; f < d; ++f) out << format_double(dataset.features(i, f)) << ",";
        std::size_t y = dataset.true_labels ? (*dataset.true_labels)[i] : 0;
        out << (y < dataset.label_names.size() ? dataset.label_names[y] : std::to_string(y)) << "\n";
    }
    detail::write_text(path, out.str());
}

// ---------------------------------------------------------------------------
// Annotation files: sample_id,expert_id,class_id,value

inline void write_annotations_csv(const AnnotationSet& annotations,
                                  const std::vector<std::string>& sample_ids,
                                  const std::string& path) {
    if (sample_ids.size() != annotations.n_samples())
        throw DimensionMismatch("write_annotations_csv: sample_ids size");
    std::ostringstream out;
    out << "sample_id,expert_id,class_id,value\n";
    for (const auto& e : annotations.entries()) {
        out << sample_ids[e.sample] << "," << e.expert << "," << e.class_id << ","
            << format_double(e.value) << "\n";
    }
    detail::write_text(path, out.str());
}

inline AnnotationSet read_annotations_csv(const std::string& path,
                                          const std::vector<std::string>& sample_ids,
                                          std::size_t n_experts, std::size_t n_classes) {
    std::vector<std::string> lines = detail::read_lines(path);
    if (lines.empty()) throw EmptyFile("annotation file is empty: " + path);
    if (detail::split_csv_line(lines[0]) !=
        std::vector<std::string>{"sample_id", "expert_id", "class_id", "value"})
        throw IoError("annotation file has unexpected header: " + path);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < sample_ids.size(); ++i) index[sample_ids[i]] = i;
    std::vector<AnnotationEntry> entries;
    entries.reserve(lines.size() - 1);
    for (std::size_t l = 1; l < lines.size(); ++l) {
        std::vector<std::string> f = detail::split_csv_line(lines[l]);
        if (f.size() != 4) throw IoError("annotation row " + std::to_string(l) + " malformed");
        auto it = index.find(f[0]);
        if (it == index.end()) throw IndexOutOfBounds("unknown sample_id: " + f[0]);
        AnnotationEntry e;
        e.sample = it->second;
        if (!try_parse_size(f[1], e.expert)) throw IoError("bad expert_id: " + f[1]);
        if (!try_parse_size(f[2], e.class_id)) throw IoError("bad class_id: " + f[2]);
        if (!try_parse_double(f[3], e.value)) throw IoError("bad value: " + f[3]);
        entries.push_back(e);
    }
    return build_annotation_set(std::move(entries), sample_ids.size(), n_experts, n_classes);
}

// Smallest (n_experts, n_classes) covering every row of an annotation file.
inline std::pair<std::size_t, std::size_t> annotation_csv_dims(const std::string& path) {
    std::vector<std::string> lines = detail::read_lines(path);
    if (lines.empty()) throw EmptyFile("annotation file is empty: " + path);
    std::size_t n_experts = 0, n_classes = 0;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        std::vector<std::string> f = detail::split_csv_line(lines[l]);
        if (f.size() != 4) throw IoError("annotation row " + std::to_string(l) + " malformed");
        std::size_t expert, class_id;
        if (!try_parse_size(f[1], expert)) throw IoError("bad expert_id: " + f[1]);
        if (!try_parse_size(f[2], class_id)) throw IoError("bad class_id: " + f[2]);
        n_experts = std::max(n_experts, expert + 1);
        n_classes = std::max(n_classes, class_id + 1);
    }
    return {n_experts, n_classes};
}

// ---------------------------------------------------------------------------
// Posterior files: sample_id,class_0,...,class_{K-1}

inline void write_posteriors_csv(const Matrix& posterior, const std::vector<std::string>& sample_ids,
                                 const std::string& path) {
    if (sample_ids.size() != posterior.rows())
        throw DimensionMismatch("write_posteriors_csv: sample_ids size");
    std::ostringstream out;
    out << "sample_id";
    for (std::size_t c = 0; c < posterior.cols(); ++c) out << ",class_" << c;
    out << "\n";
    for (std::size_t i = 0; i < posterior.rows(); ++i) {
        out << sample_ids[i];
        for (std::size_t c = 0; c < posterior.cols(); ++c)
            out << "," << format_double(posterior(i, c));
        out << "\n";
    }
    detail::write_text(path, out.str());
}

struct PosteriorTable {
    Matrix values;
    std::vector<std::string> sample_ids;
};

inline PosteriorTable read_posteriors_csv(const std::string& path) {
    std::vector<std::string> lines = detail::read_lines(path);
    if (lines.empty()) throw EmptyFile("posterior file is empty: " + path);
    std::vector<std::string> header = detail::split_csv_line(lines[0]);
    if (header.size() < 2 || header[0] != "sample_id")
        throw IoError("posterior file has unexpected header: " + path);
    const std::size_t k = header.size() - 1;
    PosteriorTable table;
    table.values = Matrix(lines.size() - 1, k);
    table.sample_ids.resize(lines.size() - 1);
    for (std::size_t l = 1; l < lines.size(); ++l) {
        std::vector<std::string> f = detail::split_csv_line(lines[l]);
        if (f.size() != header.size())
            throw IoError("posterior row " + std::to_string(l) + " malformed");
        table.sample_ids[l - 1] = f[0];
        for (std::size_t c = 0; c < k; ++c) {
            double v;
            if (!try_parse_double(f[c + 1], v)) throw IoError("bad posterior value: " + f[c + 1]);
            table.values(l - 1, c) = v;
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Hard-label files: sample_id,label

inline void write_labels_csv(const std::vector<std::size_t>& labels,
                             const std::vector<std::string>& sample_ids, const std::string& path) {
    if (sample_ids.size() != labels.size())
        throw DimensionMismatch("write_labels_csv: sample_ids size");
    std::ostringstream out;
    out << "sample_id,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
        out << sample_ids[i] << "," << labels[i] << "\n";
    detail::write_text(path, out.str());
}

} // namespace labelfuse
