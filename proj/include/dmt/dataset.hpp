#ifndef DMT_DATASET_HPP
#define DMT_DATASET_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "common.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace dmt {

/// A sample matrix with optional integer class labels.
struct Dataset {
    std::string name;
    Matrix features;               // M x N
    std::optional<std::vector<int>> labels;  // length M, values in [0, C)

    size_t size() const { return features.rows; }
    size_t dim() const { return features.cols; }
};

// ---------------------------------------------------------------------------
// Canonical decimal formatting: shortest representation that round-trips.
// ---------------------------------------------------------------------------

inline std::string format_double(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, bool& ok) {
    double value = 0.0;
    // Trim surrounding whitespace (CRLF tails included).
    size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    auto res = std::from_chars(s.data() + b, s.data() + e, value);
    ok = (res.ec == std::errc() && res.ptr == s.data() + e && b < e);
    return value;
}

// ---------------------------------------------------------------------------
// Toy dataset generators. The recipes are fixed so that downstream numbers
// are stable; every generator is a pure function of (arguments, seed).
// ---------------------------------------------------------------------------

/// 3-D roll (t cos t, y, t sin t), t ~ U[1.5pi, 4.5pi], y ~ U[0, 21], with
/// optional isotropic Gaussian jitter. Labels are 10 quantile buckets of t.
inline Dataset gen_swiss_roll(size_t m, double noise, SeededRng rng) {
    if (m < 4) throw UsageError("gen_swiss_roll: need at least 4 points");
    Dataset ds;
    ds.name = "swissroll";
    ds.features = Matrix(m, 3);
    std::vector<double> t(m);
    for (size_t i = 0; i < m; ++i) {
        t[i] = rng.uniform(1.5 * M_PI, 4.5 * M_PI);
        const double y = rng.uniform(0.0, 21.0);
        ds.features.at(i, 0) = t[i] * std::cos(t[i]);
        ds.features.at(i, 1) = y;
        ds.features.at(i, 2) = t[i] * std::sin(t[i]);
    }
    if (noise > 0.0) {
        for (size_t i = 0; i < m; ++i) {
            for (size_t j = 0; j < 3; ++j) ds.features.at(i, j) += rng.normal(0.0, noise);
        }
    }
    // Quantile bucketing of t into 10 classes.
    std::vector<size_t> order(m);
    for (size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return t[a] < t[b] || (t[a] == t[b] && a < b);
    });
    std::vector<int> labels(m);
    for (size_t rank = 0; rank < m; ++rank) {
        labels[order[rank]] = static_cast<int>(rank * 10 / m);
    }
    ds.labels = std::move(labels);
    return ds;
}

/// 2-D face: 60% unit outer circle, 10% per eye (Gaussian blobs at
/// (+-0.35, 0.35), sd 0.05), 20% mouth arc of radius 0.6 spanning the lower
/// angles [pi + a, 2pi - a] with a = pi/5. Labels 0..3 by part.
inline Dataset gen_smile_face(size_t m, SeededRng rng) {
    if (m < 40) throw UsageError("gen_smile_face: need at least 40 points");
    const size_t n_circle = static_cast<size_t>(std::floor(0.6 * m + 0.5));
    const size_t n_eye = static_cast<size_t>(std::floor(0.1 * m + 0.5));
    const size_t n_mouth = m - n_circle - 2 * n_eye;
    Dataset ds;
    ds.name = "smileface";
    ds.features = Matrix(m, 2);
    std::vector<int> labels(m);
    size_t row = 0;
    for (size_t i = 0; i < n_circle; ++i, ++row) {
        const double a = rng.uniform(0.0, 2.0 * M_PI);
        ds.features.at(row, 0) = std::cos(a);
        ds.features.at(row, 1) = std::sin(a);
        labels[row] = 0;
    }
    for (int eye = 0; eye < 2; ++eye) {
        const double cx = eye == 0 ? -0.35 : 0.35;
        for (size_t i = 0; i < n_eye; ++i, ++row) {
            ds.features.at(row, 0) = rng.normal(cx, 0.05);
            ds.features.at(row, 1) = rng.normal(0.35, 0.05);
            labels[row] = 1 + eye;
        }
    }
    const double arc = M_PI / 5.0;
    for (size_t i = 0; i < n_mouth; ++i, ++row) {
        const double a = rng.uniform(M_PI + arc, 2.0 * M_PI - arc);
        ds.features.at(row, 0) = 0.6 * std::cos(a);
        ds.features.at(row, 1) = 0.6 * std::sin(a);
        labels[row] = 3;
    }
    ds.labels = std::move(labels);
    return ds;
}

/// Three isotropic Gaussians with per-coordinate stddevs (1, 2, 4), centred
/// on mutually orthogonal directions of norm 20. The distinct scatters make
/// the scatter-rank metric discriminative.
inline Dataset gen_three_gauss(size_t m, size_t dim, SeededRng rng) {
    if (m % 3 != 0) throw UsageError("gen_three_gauss: size must be divisible by 3");
    if (dim < 3) throw UsageError("gen_three_gauss: dim must be at least 3");
    const double stddevs[3] = {1.0, 2.0, 4.0};
    Dataset ds;
    ds.name = "threegauss";
    ds.features = Matrix(m, dim);
    std::vector<int> labels(m);
    const size_t per = m / 3;
    size_t row = 0;
    for (int c = 0; c < 3; ++c) {
        for (size_t i = 0; i < per; ++i, ++row) {
            for (size_t j = 0; j < dim; ++j) {
                const double mean = (j == static_cast<size_t>(c)) ? 20.0 : 0.0;
                ds.features.at(row, j) = rng.normal(mean, stddevs[c]);
            }
            labels[row] = c;
        }
    }
    ds.labels = std::move(labels);
    return ds;
}

/// Three distinct random locations, each duplicated bitwise `copies` times.
inline Dataset gen_repeat_points(size_t copies, size_t dim, SeededRng rng) {
    if (copies < 1) throw UsageError("gen_repeat_points: copies must be >= 1");
    if (dim < 1) throw UsageError("gen_repeat_points: dim must be >= 1");
    Matrix locs(3, dim);
    for (;;) {
        for (size_t c = 0; c < 3; ++c) {
            for (size_t j = 0; j < dim; ++j) locs.at(c, j) = rng.uniform(-10.0, 10.0);
        }
        bool distinct = true;
        for (size_t a = 0; a < 3 && distinct; ++a) {
            for (size_t b = a + 1; b < 3 && distinct; ++b) {
                bool equal = true;
                for (size_t j = 0; j < dim; ++j) {
                    if (locs.at(a, j) != locs.at(b, j)) { equal = false; break; }
                }
                if (equal) distinct = false;
            }
        }
        if (distinct) break;
    }
    Dataset ds;
    ds.name = "repeatpoints";
    ds.features = Matrix(3 * copies, dim);
    std::vector<int> labels(3 * copies);
    size_t row = 0;
    for (int c = 0; c < 3; ++c) {
        for (size_t i = 0; i < copies; ++i, ++row) {
            for (size_t j = 0; j < dim; ++j) ds.features.at(row, j) = locs.at(c, j);
            labels[row] = c;
        }
    }
    ds.labels = std::move(labels);
    return ds;
}

// ---------------------------------------------------------------------------
// CSV ingestion / emission.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

}  // namespace detail

/**
 * Loads a comma-separated numeric file.
 *
 * A leading header row is skipped when any of its cells fails numeric
 * parsing. `label_col`, when set, extracts that column as integer labels.
 * `max_rows` takes a seeded uniform subsample without replacement, emitted
 * in ascending original row order. Errors carry 1-based row/column
 * locations.
 */
inline Dataset load_csv(const std::string& path,
                        std::optional<size_t> label_col,
                        std::optional<size_t> max_rows,
                        SeededRng rng) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_csv: cannot open '" + path + "'");
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::vector<std::string_view> lines;
    {
        std::string_view sv(contents);
        size_t start = 0;
        for (size_t i = 0; i <= sv.size(); ++i) {
            if (i == sv.size() || sv[i] == '\n') {
                std::string_view line = sv.substr(start, i - start);
                if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
                if (!line.empty()) lines.push_back(line);
                start = i + 1;
            }
        }
    }
    if (lines.empty()) throw DataError("load_csv: '" + path + "' has no data rows");

    // Header detection: first row with any non-numeric cell is skipped.
    size_t first = 0;
    {
        bool numeric = true;
        for (auto f : detail::split_fields(lines[0])) {
            bool ok = false;
            parse_double(f, ok);
            if (!ok) { numeric = false; break; }
        }
        if (!numeric) first = 1;
        if (first == lines.size()) throw DataError("load_csv: '" + path + "' has only a header row");
    }

    const size_t total = lines.size() - first;
    const size_t ncols = detail::split_fields(lines[first]).size();
    if (label_col && *label_col >= ncols) {
        throw DataError("load_csv: label column " + std::to_string(*label_col) +
                        " out of range for " + std::to_string(ncols) + " columns");
    }
    if (!label_col && ncols < 1) throw DataError("load_csv: empty rows");
    if (label_col && ncols < 2) throw DataError("load_csv: no feature columns besides the label");

    // Subsample selection, ascending original order.
    std::vector<size_t> chosen(total);
    for (size_t i = 0; i < total; ++i) chosen[i] = i;
    if (max_rows && *max_rows < total) {
        rng.shuffle(chosen);
        chosen.resize(*max_rows);
        std::sort(chosen.begin(), chosen.end());
    }

    Dataset ds;
    ds.name = path;
    ds.features = Matrix(chosen.size(), label_col ? ncols - 1 : ncols);
    std::vector<int> labels;
    if (label_col) labels.resize(chosen.size());

    for (size_t out_row = 0; out_row < chosen.size(); ++out_row) {
        const size_t li = first + chosen[out_row];
        auto fields = detail::split_fields(lines[li]);
        if (fields.size() != ncols) {
            throw DataError("load_csv: row " + std::to_string(li + 1) + " has " +
                            std::to_string(fields.size()) + " columns, expected " +
                            std::to_string(ncols));
        }
        size_t fj = 0;
        for (size_t j = 0; j < ncols; ++j) {
            bool ok = false;
            const double v = parse_double(fields[j], ok);
            if (!ok || !std::isfinite(v)) {
                throw DataError("load_csv: non-numeric cell at row " + std::to_string(li + 1) +
                                ", column " + std::to_string(j + 1));
            }
            if (label_col && j == *label_col) {
                const double r = std::nearbyint(v);
                if (r != v || r < 0) {
                    throw DataError("load_csv: label at row " + std::to_string(li + 1) +
                                    " is not a nonnegative integer");
                }
                labels[out_row] = static_cast<int>(r);
            } else {
                ds.features.at(out_row, fj++) = v;
            }
        }
    }
    if (label_col) ds.labels = std::move(labels);
    return ds;
}

/// Serializes a dataset in the canonical format: optional label first,
/// shortest round-trip decimals, LF line endings, no header.
inline std::string dataset_to_csv(const Dataset& ds) {
    std::string out;
    out.reserve(ds.size() * (ds.dim() + 1) * 12);
    for (size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels) {
            out += std::to_string((*ds.labels)[i]);
            out += ',';
        }
        for (size_t j = 0; j < ds.dim(); ++j) {
            if (j > 0) out += ',';
            out += format_double(ds.features.at(i, j));
        }
        out += '\n';
    }
    return out;
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("short write to '" + path + "'");
}

/// FNV-1a 64-bit over the canonical CSV emission; used as the dataset
/// fingerprint in run manifests.
inline uint64_t fingerprint(const Dataset& ds) {
    const std::string csv = dataset_to_csv(ds);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : csv) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}

#endif
