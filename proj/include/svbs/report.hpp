#pragma once

// Summary of a written trace CSV.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "svbs/decay.hpp"
#include "svbs/errors.hpp"

namespace svbs {

struct TraceTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const {
        const auto it = std::find(columns.begin(), columns.end(), name);
        return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
    }
    std::vector<double> values(int c) const {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(c)]);
        return out;
    }
};

inline TraceTable read_trace_csv(std::istream& in) {
    TraceTable t;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("trace: empty file");
    {
        std::istringstream hs(line);
        std::string name;
        while (std::getline(hs, name, ',')) t.columns.push_back(name);
    }
    if (t.columns.empty() || t.columns.front() != "t") throw ConfigError("trace: first column must be 't'");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ConfigError("trace line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (row.size() != t.columns.size())
            throw ConfigError("trace line " + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                              " values");
        t.rows.push_back(std::move(row));
    }
    if (t.rows.size() < 2) throw ConfigError("trace: need at least 2 rows");
    return t;
}

inline TraceTable read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trace '" + path + "'");
    return read_trace_csv(in);
}

/// Peak |value| and the last time it exceeds `fraction` of the peak.
struct SignalSummary {
    double peak = 0.0;
    double last_above = 0.0;
};

inline SignalSummary summarize_signal(const std::vector<double>& t, const std::vector<double>& y, double fraction) {
    SignalSummary s;
    for (double v : y) s.peak = std::max(s.peak, std::abs(v));
    for (std::size_t k = 0; k < y.size(); ++k)
        if (std::abs(y[k]) > fraction * s.peak) s.last_above = t[k];
    return s;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline void write_trace_summary(std::ostream& os, const TraceTable& t) {
    const std::vector<double> time = t.values(0);
    os << std::setprecision(6);
    os << "rows = " << t.rows.size() << ", t in [" << time.front() << ", " << time.back() << "]\n";
    const int tot = t.column("total_norm");
    if (tot >= 0) {
        const auto n = t.values(tot);
        os << "total_norm: initial " << n.front() << ", final " << n.back() << ", ratio "
           << (n.front() > 0.0 ? n.back() / n.front() : 0.0) << '\n';
    }
    for (std::size_t c = 1; c < t.columns.size(); ++c) {
        const std::string& name = t.columns[c];
        const auto y = t.values(static_cast<int>(c));
        if (ends_with(name, "_norm") && name != "total_norm") {
            const Envelope e = exponential_envelope(time, y);
            os << name << ": envelope " << e.amplitude << " exp(-" << e.rate << " t)\n";
        } else if (ends_with(name, "_ctrl") || (name.size() > 1 && name[0] == 'U')) {
            const SignalSummary s = summarize_signal(time, y, 0.05);
            os << name << ": peak " << s.peak << ", last above 5% of peak at t = " << s.last_above << '\n';
        } else if (name == "V") {
            if (std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); })) {
                const Envelope e = exponential_envelope(time, y);
                os << "V: initial " << y.front() << ", final " << y.back() << ", fitted rate " << e.rate << '\n';
            } else {
                os << "V: not recorded\n";
            }
        }
    }
}

}  // namespace svbs
