#include "prdim/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace prdim {

namespace {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

MaskedDataset take_rows(const MaskedDataset& ds, const std::vector<std::size_t>& idx) {
    MaskedDataset out;
    const std::size_t d = ds.cols();
    out.x = Tensor::zeros({idx.size(), d});
    out.m = Tensor::zeros({idx.size(), d});
    if (ds.has_artificial()) out.a = Tensor::zeros({idx.size(), d});
    out.axis_meta = ds.axis_meta;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            out.x.at(i, j) = ds.x.at(idx[i], j);
            out.m.at(i, j) = ds.m.at(idx[i], j);
            if (ds.has_artificial()) out.a.at(i, j) = ds.a.at(idx[i], j);
        }
    }
    return out;
}

} // namespace

void MaskedDataset::validate() const {
    if (!x.same_shape(m)) throw std::logic_error("dataset x/m shape mismatch");
    if (has_artificial() && !a.same_shape(m)) throw std::logic_error("dataset a/m shape mismatch");
    for (std::size_t i = 0; i < m.numel(); ++i) {
        double mv = m.values[i];
        if (mv != 0.0 && mv != 1.0) throw std::logic_error("mask m is not binary");
        if (mv == 1.0 && !std::isfinite(x.values[i])) throw std::logic_error("x not finite on observed entry");
        if (has_artificial()) {
            double av = a.values[i];
            if (av != 0.0 && av != 1.0) throw std::logic_error("mask a is not binary");
            if (av == 1.0 && mv != 1.0) throw std::logic_error("artificial mask exceeds observed mask");
        }
    }
    if (axis_meta && axis_meta->features * axis_meta->steps != cols()) {
        throw std::logic_error("axis_meta K*L does not match column count");
    }
}

Tensor observed_fill(const MaskedDataset& ds) { return observed_fill(ds.x, ds.m); }

Tensor observed_fill(const Tensor& x, const Tensor& m) {
    if (!x.same_shape(m)) throw std::invalid_argument("observed_fill shape mismatch");
    Tensor out = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        if (m.values[i] == 1.0) out.values[i] = x.values[i];
    }
    return out;
}

MaskedDataset load_csv(const std::string& path, bool has_header, const std::string& missing_token) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<double>> masks;
    std::size_t ncols = 0;
    std::size_t lineno = 0;
    bool header_skipped = !has_header;
    while (std::getline(in, line)) {
        ++lineno;
        if (!header_skipped) {
            header_skipped = true;
            continue;
        }
        if (trim(line).empty() && rows.empty()) continue;  // leading blank lines
        if (trim(line).empty()) continue;                  // trailing blank lines
        auto cells = split_line(line);
        if (ncols == 0) {
            ncols = cells.size();
        } else if (cells.size() != ncols) {
            throw std::runtime_error(path + ": ragged row at line " + std::to_string(lineno) + " (" +
                                     std::to_string(cells.size()) + " cells, expected " + std::to_string(ncols) + ")");
        }
        std::vector<double> vrow(ncols), mrow(ncols);
        for (std::size_t j = 0; j < ncols; ++j) {
            std::string cell = trim(cells[j]);
            if (cell.empty() || cell == missing_token) {
                vrow[j] = std::nan("");
                mrow[j] = 0.0;
                continue;
            }
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
                throw std::runtime_error(path + ": unparseable cell '" + cell + "' at line " +
                                         std::to_string(lineno) + ", column " + std::to_string(j + 1));
            }
            vrow[j] = v;
            mrow[j] = 1.0;
        }
        rows.push_back(std::move(vrow));
        masks.push_back(std::move(mrow));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no rows");
    MaskedDataset ds;
    ds.x = Tensor::zeros({rows.size(), ncols});
    ds.m = Tensor::zeros({rows.size(), ncols});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < ncols; ++j) {
            ds.x.at(i, j) = rows[i][j];
            ds.m.at(i, j) = masks[i][j];
        }
    }
    return ds;
}

void dump_csv(const MaskedDataset& ds, const std::string& path, const std::string& missing_token) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        for (std::size_t j = 0; j < ds.cols(); ++j) {
            if (j) out << ',';
            if (ds.m.at(i, j) == 1.0) {
                out << format_double(ds.x.at(i, j));
            } else {
                out << missing_token;
            }
        }
        out << '\n';
    }
}

void write_csv_matrix(const Tensor& x, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (j) out << ',';
            out << format_double(x.at(i, j));
        }
        out << '\n';
    }
}

MaskedDataset window_series(const Tensor& series, std::size_t window_len, std::size_t stride) {
    Tensor mask = Tensor::zeros(series.shape);
    for (std::size_t i = 0; i < series.numel(); ++i) {
        mask.values[i] = std::isfinite(series.values[i]) ? 1.0 : 0.0;
    }
    return window_series(series, mask, window_len, stride);
}

MaskedDataset window_series(const Tensor& series, const Tensor& series_mask,
                            std::size_t window_len, std::size_t stride) {
    if (series.rank() != 2) throw std::invalid_argument("window_series expects a [T x K] series");
    if (!series.same_shape(series_mask)) throw std::invalid_argument("window_series mask shape mismatch");
    const std::size_t total = series.shape[0];
    const std::size_t k = series.shape[1];
    if (window_len == 0 || stride == 0) throw std::invalid_argument("window length and stride must be positive");
    if (window_len > total) {
        throw std::invalid_argument("window length " + std::to_string(window_len) + " exceeds series length " +
                                    std::to_string(total));
    }
    const std::size_t n = (total - window_len) / stride + 1;
    MaskedDataset ds;
    ds.x = Tensor::zeros({n, k * window_len});
    ds.m = Tensor::zeros({n, k * window_len});
    ds.axis_meta = AxisMeta{k, window_len};
    for (std::size_t w = 0; w < n; ++w) {
        for (std::size_t f = 0; f < k; ++f) {
            for (std::size_t t = 0; t < window_len; ++t) {
                double v = series.at(w * stride + t, f);
                double mv = series_mask.at(w * stride + t, f);
                ds.x.at(w, f * window_len + t) = v;
                ds.m.at(w, f * window_len + t) = mv;
            }
        }
    }
    return ds;
}

std::pair<MaskedDataset, NormStats> standardize(const MaskedDataset& ds,
                                                const std::optional<NormStats>& stats) {
    const std::size_t d = ds.cols();
    NormStats st;
    if (stats) {
        if (stats->mean.size() != d || stats->std.size() != d) {
            throw std::invalid_argument("normalization stats column count mismatch");
        }
        st = *stats;
    } else {
        st.mean.assign(d, 0.0);
        st.std.assign(d, 1.0);
        for (std::size_t j = 0; j < d; ++j) {
            double sum = 0.0, sumsq = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < ds.rows(); ++i) {
                if (ds.m.at(i, j) == 1.0) {
                    sum += ds.x.at(i, j);
                    sumsq += ds.x.at(i, j) * ds.x.at(i, j);
                    ++n;
                }
            }
            if (n == 0) throw std::runtime_error("column " + std::to_string(j + 1) + " has no observed entries");
            double mean = sum / (double)n;
            double var = sumsq / (double)n - mean * mean;
            double sd = var > 0.0 ? std::sqrt(var) : 0.0;
            st.mean[j] = mean;
            st.std[j] = sd < 1e-12 ? 1.0 : sd;
        }
    }
    MaskedDataset out = ds;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double v = out.x.at(i, j);
            if (std::isfinite(v)) out.x.at(i, j) = (v - st.mean[j]) / st.std[j];
        }
    }
    return {std::move(out), std::move(st)};
}

Tensor unstandardize(const Tensor& x, const NormStats& stats) {
    if (x.cols() != stats.mean.size()) throw std::invalid_argument("unstandardize column count mismatch");
    Tensor out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) {
            out.at(i, j) = out.at(i, j) * stats.std[j] + stats.mean[j];
        }
    }
    return out;
}

SplitResult split(const MaskedDataset& ds, double train_ratio, double valid_ratio,
                  double test_ratio, std::uint64_t seed, bool shuffle) {
    if (train_ratio < 0 || valid_ratio < 0 || test_ratio < 0) {
        throw std::invalid_argument("split ratios must be non-negative");
    }
    double sum = train_ratio + valid_ratio + test_ratio;
    if (sum > 1.0 + 1e-9) throw std::invalid_argument("split ratios sum exceeds 1");
    const std::size_t n = ds.rows();
    std::size_t n_train = (std::size_t)((double)n * train_ratio + 1e-9);
    std::size_t n_valid = (std::size_t)((double)n * valid_ratio + 1e-9);
    std::size_t n_test = (std::size_t)((double)n * test_ratio + 1e-9);
    // When the ratios cover everything, flooring leftovers go to train.
    if (sum > 1.0 - 1e-9) n_train = n - n_valid - n_test;
    auto check = [n](double ratio, std::size_t size, const char* name) {
        if (ratio > 0 && size == 0) {
            throw std::runtime_error(std::string(name) + " split is empty: " + std::to_string(n) +
                                     " rows cannot honor ratio " + std::to_string(ratio));
        }
    };
    check(train_ratio, n_train, "train");
    check(valid_ratio, n_valid, "valid");
    check(test_ratio, n_test, "test");

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (shuffle) {
        Rng rng(seed);
        rng.shuffle(idx);
    }
    std::vector<std::size_t> tr(idx.begin(), idx.begin() + n_train);
    std::vector<std::size_t> va(idx.begin() + n_train, idx.begin() + n_train + n_valid);
    std::vector<std::size_t> te(idx.begin() + n_train + n_valid, idx.begin() + n_train + n_valid + n_test);
    return {take_rows(ds, tr), take_rows(ds, va), take_rows(ds, te)};
}

} // namespace prdim
