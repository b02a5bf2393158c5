#include "dimignn/series.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace dimignn {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stod(t, &pos);
    } catch (...) {
        return false;
    }
    return pos == t.size();
}

} // namespace

SeriesTensor SeriesTensor::time_range(int start, int len) const {
    if (start < 0 || len < 1 || start + len > t_len) {
        throw DataError("time_range [" + std::to_string(start) + "," + std::to_string(start + len) +
                        ") out of bounds for T=" + std::to_string(t_len));
    }
    SeriesTensor out;
    out.t_len = len;
    out.n_vars = n_vars;
    out.c_attrs = c_attrs;
    out.variable_names = variable_names;
    out.attribute_names = attribute_names;
    out.step = step;
    const std::size_t row = static_cast<std::size_t>(n_vars) * c_attrs;
    out.values.assign(values.begin() + static_cast<std::size_t>(start) * row,
                      values.begin() + static_cast<std::size_t>(start + len) * row);
    return out;
}

void SeriesTensor::validate() const {
    if (t_len < 1 || n_vars < 2 || c_attrs < 1) {
        throw DataError("series requires T >= 1, N >= 2, C >= 1; got T=" + std::to_string(t_len) +
                        " N=" + std::to_string(n_vars) + " C=" + std::to_string(c_attrs));
    }
    if (values.size() != static_cast<std::size_t>(t_len) * n_vars * c_attrs) {
        throw DataError("series value count does not match dimensions");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw DataError("series contains a non-finite value");
    }
}

SeriesTensor load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV file: " + path);
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);
    if (header.size() < 3) {
        throw DataError("CSV needs at least (timestamp, variable, attribute) columns: " + path);
    }

    auto col_of = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("CSV is missing column '" + name + "': " + path);
        return static_cast<int>(it - header.begin());
    };

    const int time_col = schema.time_column.empty() ? 0 : col_of(schema.time_column);
    const int var_col = schema.variable_column.empty() ? 1 : col_of(schema.variable_column);
    std::vector<int> attr_cols;
    std::vector<std::string> attr_names;
    if (schema.attribute_columns.empty()) {
        for (int i = 0; i < static_cast<int>(header.size()); ++i) {
            if (i != time_col && i != var_col) {
                attr_cols.push_back(i);
                attr_names.push_back(header[i]);
            }
        }
    } else {
        for (const auto& name : schema.attribute_columns) {
            attr_cols.push_back(col_of(name));
            attr_names.push_back(name);
        }
    }
    if (attr_cols.empty()) throw DataError("CSV has no attribute columns: " + path);

    struct Row {
        std::string time;
        std::vector<double> attrs;
    };
    std::map<std::string, std::vector<Row>> by_var;  // ordered: lexicographic variable order
    std::set<std::string> timestamps;
    bool all_numeric_time = true;

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() < header.size()) {
            throw DataError("row " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
        }
        Row row;
        row.time = trim(cells[time_col]);
        double tmp;
        if (!parse_double(row.time, tmp)) all_numeric_time = false;
        const std::string var = trim(cells[var_col]);
        row.attrs.resize(attr_cols.size());
        for (std::size_t a = 0; a < attr_cols.size(); ++a) {
            if (!parse_double(cells[attr_cols[a]], row.attrs[a])) {
                throw DataError("row " + std::to_string(line_no) + ", column '" + attr_names[a] +
                                "': cannot parse '" + trim(cells[attr_cols[a]]) + "' as a number");
            }
        }
        timestamps.insert(row.time);
        by_var[var].push_back(std::move(row));
    }

    if (by_var.size() < 2) throw DataError("CSV must contain at least 2 variables: " + path);

    std::vector<std::string> times(timestamps.begin(), timestamps.end());
    if (all_numeric_time) {
        std::sort(times.begin(), times.end(), [](const std::string& a, const std::string& b) {
            return std::stod(a) < std::stod(b);
        });
    }
    std::map<std::string, int> time_index;
    for (int i = 0; i < static_cast<int>(times.size()); ++i) time_index[times[i]] = i;

    // Every variable must cover exactly the union of timestamps, once each.
    std::vector<std::string> offenders;
    for (const auto& [var, rows] : by_var) {
        std::set<std::string> seen;
        bool dup = false;
        for (const auto& r : rows) dup = dup || !seen.insert(r.time).second;
        if (dup || seen.size() != times.size()) offenders.push_back(var);
    }
    if (!offenders.empty()) {
        std::string msg = "ragged series: variables with missing or duplicated timestamps:";
        for (const auto& v : offenders) msg += " " + v;
        throw DataError(msg);
    }

    SeriesTensor out;
    out.t_len = static_cast<int>(times.size());
    out.n_vars = static_cast<int>(by_var.size());
    out.c_attrs = static_cast<int>(attr_cols.size());
    out.attribute_names = attr_names;
    out.values.assign(static_cast<std::size_t>(out.t_len) * out.n_vars * out.c_attrs, 0.0);
    int n = 0;
    for (const auto& [var, rows] : by_var) {
        out.variable_names.push_back(var);
        for (const auto& r : rows) {
            const int t = time_index[r.time];
            for (int c = 0; c < out.c_attrs; ++c) out.at(t, n, c) = r.attrs[c];
        }
        ++n;
    }
    out.validate();
    return out;
}

void write_series_csv(const SeriesTensor& series, const std::string& path) {
    std::ofstream outf(path);
    if (!outf) throw DataError("cannot open for writing: " + path);
    outf << "timestamp,variable";
    for (const auto& a : series.attribute_names) outf << ',' << a;
    outf << '\n';
    outf.precision(17);
    for (int t = 0; t < series.t_len; ++t) {
        for (int nvar = 0; nvar < series.n_vars; ++nvar) {
            outf << t << ',' << series.variable_names[nvar];
            for (int c = 0; c < series.c_attrs; ++c) outf << ',' << series.at(t, nvar, c);
            outf << '\n';
        }
    }
}

NormStats NormStats::fit(const SeriesTensor& train) {
    NormStats s;
    s.n_vars = train.n_vars;
    s.c_attrs = train.c_attrs;
    const int nc = train.n_vars * train.c_attrs;
    s.mean.assign(nc, 0.0);
    s.stddev.assign(nc, 0.0);
    for (int n = 0; n < train.n_vars; ++n) {
        for (int c = 0; c < train.c_attrs; ++c) {
            double acc = 0.0;
            for (int t = 0; t < train.t_len; ++t) acc += train.at(t, n, c);
            const double mean = acc / train.t_len;
            double var = 0.0;
            for (int t = 0; t < train.t_len; ++t) {
                const double d = train.at(t, n, c) - mean;
                var += d * d;
            }
            var /= train.t_len;
            const int id = n * train.c_attrs + c;
            s.mean[id] = mean;
            double sd = std::sqrt(var);
            if (sd <= 1e-12) {
                sd = 1.0;  // constant channel: pass through unscaled
                s.constant_channels.push_back(id);
            }
            s.stddev[id] = sd;
        }
    }
    return s;
}

SeriesTensor NormStats::apply(const SeriesTensor& s) const {
    if (s.n_vars != n_vars || s.c_attrs != c_attrs) {
        throw DataError("normalization stats do not match series dimensions");
    }
    SeriesTensor out = s;
    for (int t = 0; t < s.t_len; ++t) {
        for (int n = 0; n < n_vars; ++n) {
            for (int c = 0; c < c_attrs; ++c) {
                const int id = n * c_attrs + c;
                out.at(t, n, c) = (s.at(t, n, c) - mean[id]) / stddev[id];
            }
        }
    }
    return out;
}

SeriesTensor NormStats::invert(const SeriesTensor& s) const {
    if (s.n_vars != n_vars || s.c_attrs != c_attrs) {
        throw DataError("normalization stats do not match series dimensions");
    }
    SeriesTensor out = s;
    for (int t = 0; t < s.t_len; ++t) {
        for (int n = 0; n < n_vars; ++n) {
            for (int c = 0; c < c_attrs; ++c) {
                const int id = n * c_attrs + c;
                out.at(t, n, c) = s.at(t, n, c) * stddev[id] + mean[id];
            }
        }
    }
    return out;
}

double NormStats::denorm_target(double v, int var) const {
    const int id = var * c_attrs + 0;
    return v * stddev[id] + mean[id];
}

std::string NormStats::to_json() const {
    nlohmann::json j;
    j["n_vars"] = n_vars;
    j["c_attrs"] = c_attrs;
    j["mean"] = mean;
    j["stddev"] = stddev;
    j["constant_channels"] = constant_channels;
    return j.dump(2);
}

NormStats NormStats::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    NormStats s;
    s.n_vars = j.at("n_vars").get<int>();
    s.c_attrs = j.at("c_attrs").get<int>();
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("stddev").get<std::vector<double>>();
    s.constant_channels = j.at("constant_channels").get<std::vector<int>>();
    return s;
}

SplitSeries split_chronological(const SeriesTensor& series,
                                double train_ratio, double val_ratio, double test_ratio,
                                int input_len, int horizon) {
    const double sum = train_ratio + val_ratio + test_ratio;
    if (std::fabs(sum - 1.0) > 1e-9) {
        throw DataError("split ratios must sum to 1, got " + std::to_string(sum));
    }
    if (train_ratio <= 0.0 || val_ratio <= 0.0 || test_ratio <= 0.0) {
        throw DataError("split ratios must all be positive (every split needs at least one window)");
    }
    const int t = series.t_len;
    const int n_train = static_cast<int>(std::floor(train_ratio * t + 1e-9));
    const int n_val = static_cast<int>(std::floor(val_ratio * t + 1e-9));
    const int n_test = t - n_train - n_val;
    const int need = input_len + horizon;
    if (n_train < need || n_val < need || n_test < need) {
        throw DataError("split too short for input_len+horizon=" + std::to_string(need) +
                        ": train=" + std::to_string(n_train) + " val=" + std::to_string(n_val) +
                        " test=" + std::to_string(n_test));
    }
    SplitSeries out;
    out.train = series.time_range(0, n_train);
    out.val = series.time_range(n_train, n_val);
    out.test = series.time_range(n_train + n_val, n_test);
    return out;
}

Tensor WindowedDataset::input(std::size_t i) const {
    const int t0 = starts[i];
    const std::size_t row = static_cast<std::size_t>(series.n_vars) * series.c_attrs;
    std::vector<double> v(series.values.begin() + t0 * row,
                          series.values.begin() + (t0 + input_len) * row);
    return Tensor({input_len, series.n_vars, series.c_attrs}, std::move(v));
}

Tensor WindowedDataset::target(std::size_t i) const {
    const int t0 = starts[i] + input_len;
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(horizon) * series.n_vars);
    for (int t = t0; t < t0 + horizon; ++t) {
        for (int n = 0; n < series.n_vars; ++n) v.push_back(series.at(t, n, 0));
    }
    return Tensor({horizon, series.n_vars, 1}, std::move(v));
}

WindowedDataset make_windows(const SeriesTensor& series, int input_len, int horizon, int stride) {
    if (input_len < 1 || horizon < 1 || stride < 1) {
        throw DataError("make_windows requires input_len, horizon, stride >= 1");
    }
    if (series.t_len < input_len + horizon) {
        throw DataError("series too short for windows: T=" + std::to_string(series.t_len) +
                        " < input_len+horizon=" + std::to_string(input_len + horizon));
    }
    WindowedDataset ds;
    ds.input_len = input_len;
    ds.horizon = horizon;
    ds.stride = stride;
    ds.series = series;
    for (int s = 0; s + input_len + horizon <= series.t_len; s += stride) ds.starts.push_back(s);
    return ds;
}

CouplingGraph CouplingGraph::cross_group_ring(int n_vars, int lag, double weight) {
    CouplingGraph g;
    const int half = n_vars / 2;
    for (int i = 0; i < n_vars; ++i) {
        CouplingEdge e;
        e.child = i;
        e.parent = (i + half) % n_vars;
        e.lag = lag;
        e.weight = weight;
        g.edges.push_back(e);
    }
    return g;
}

SeriesTensor synth_coupled(int n_vars, int c_attrs, int t_len, std::uint64_t seed,
                           const CouplingGraph& graph, const SynthOptions& opts) {
    if (n_vars < 2 || c_attrs < 1 || t_len < 1) {
        throw DataError("synth_coupled requires N >= 2, C >= 1, T >= 1");
    }
    int max_back = c_attrs;  // secondary attributes look back up to C-1 steps
    for (const auto& e : graph.edges) {
        if (e.parent < 0 || e.parent >= n_vars || e.child < 0 || e.child >= n_vars || e.lag < 0) {
            throw DataError("coupling edge out of range");
        }
        max_back = std::max(max_back, e.lag);
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    constexpr double two_pi = 6.283185307179586;

    // Per-variable seasonal layout. With groups, members of a group share
    // frequency and phase (informationally near-redundant); without groups
    // every variable gets its own frequency and phase so that channels stay
    // decorrelated.
    std::vector<double> freq(n_vars), phase(n_vars);
    for (int i = 0; i < n_vars; ++i) {
        if (opts.group_count > 0) {
            const int g = i * opts.group_count / n_vars;
            freq[i] = two_pi / opts.period;
            phase[i] = two_pi * g / opts.group_count;
        } else {
            freq[i] = two_pi / (opts.period * (1.0 + 0.5 * (i + unif(rng)) / n_vars));
            phase[i] = two_pi * unif(rng);
        }
    }

    // Base signals over an extended range so lags never index before t=0.
    const int t_ext = t_len + max_back;
    std::vector<std::vector<double>> base(n_vars, std::vector<double>(t_ext));
    for (int i = 0; i < n_vars; ++i) {
        for (int t = 0; t < t_ext; ++t) {
            base[i][t] = opts.seasonal_amp * std::sin(freq[i] * (t - max_back) + phase[i]) +
                         opts.noise_sigma * gauss(rng);
        }
    }

    std::vector<std::vector<double>> main(n_vars, std::vector<double>(t_ext));
    for (int i = 0; i < n_vars; ++i) main[i] = base[i];
    for (const auto& e : graph.edges) {
        for (int t = 0; t < t_ext; ++t) {
            const int src = t - e.lag;
            if (src >= 0) main[e.child][t] += e.weight * base[e.parent][src];
        }
    }

    SeriesTensor out;
    out.t_len = t_len;
    out.n_vars = n_vars;
    out.c_attrs = c_attrs;
    out.values.assign(static_cast<std::size_t>(t_len) * n_vars * c_attrs, 0.0);
    for (int i = 0; i < n_vars; ++i) {
        std::string name = "v";
        if (i < 10) name += '0';
        name += std::to_string(i);
        out.variable_names.push_back(name);
    }
    out.attribute_names.push_back("target");
    for (int c = 1; c < c_attrs; ++c) out.attribute_names.push_back("a" + std::to_string(c));

    for (int i = 0; i < n_vars; ++i) {
        for (int t = 0; t < t_len; ++t) {
            for (int c = 0; c < c_attrs; ++c) {
                const int src = t + max_back - c;  // attribute c lags the target by c steps
                out.at(t, i, c) = main[i][src] + opts.obs_noise_sigma * gauss(rng);
            }
        }
    }
    out.validate();
    return out;
}

double cross_correlation(const SeriesTensor& s, int var_a, int var_b, int lag) {
    if (lag < 0 || lag >= s.t_len - 1) throw DataError("cross_correlation: lag out of range");
    const int n = s.t_len - lag;
    double ma = 0.0, mb = 0.0;
    for (int t = lag; t < s.t_len; ++t) ma += s.at(t, var_a, 0);
    for (int t = 0; t < n; ++t) mb += s.at(t, var_b, 0);
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (int t = 0; t < n; ++t) {
        const double da = s.at(t + lag, var_a, 0) - ma;
        const double db = s.at(t, var_b, 0) - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va <= 0.0 || vb <= 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

} // namespace dimignn
