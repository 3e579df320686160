#include "barrier/report.hpp"

#include "barrier/errors.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace barrier::report {

std::string number(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw Error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

namespace {

std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return number(v);
}

std::string header(const std::vector<std::string>& names) {
    std::string s;
    for (std::size_t i = 0; i < names.size(); ++i) s += (i ? "," : "") + csv_escape(names[i]);
    return s;
}

} // namespace

std::string margins_csv(const std::vector<MarginRow>& rows, const std::vector<std::string>& state_vars) {
    std::vector<std::string> cols = state_vars;
    for (const char* c : {"h", "rate", "alpha_h", "slack"}) cols.emplace_back(c);
    std::string out = header(cols) + "\n";
    for (const auto& r : rows) {
        for (double v : r.x) out += csv_number(v) + ",";
        out += csv_number(r.h) + "," + csv_number(r.rate) + "," + csv_number(r.alpha_h) + "," + csv_number(r.slack) +
               "\n";
    }
    return out;
}

std::string trace_csv(const SimulationResult& r, const std::vector<std::string>& state_vars,
                      const std::vector<std::string>& input_vars) {
    std::vector<std::string> cols{"t"};
    cols.insert(cols.end(), state_vars.begin(), state_vars.end());
    cols.insert(cols.end(), input_vars.begin(), input_vars.end());
    cols.emplace_back("h");
    if (!r.V.empty()) cols.emplace_back("V");
    cols.emplace_back("delta");
    std::string out = header(cols) + "\n";
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        out += csv_number(r.times[k]);
        for (double v : r.states[k]) out += "," + csv_number(v);
        if (k < r.inputs.size())
            for (double v : r.inputs[k]) out += "," + csv_number(v);
        else
            for (std::size_t j = 0; j < input_vars.size(); ++j) out += ",";
        out += "," + (k < r.h.size() ? csv_number(r.h[k]) : std::string());
        if (!r.V.empty()) out += "," + (k < r.V.size() ? csv_number(r.V[k]) : std::string());
        out += "," + (k < r.delta.size() ? csv_number(r.delta[k]) : std::string());
        out += "\n";
    }
    return out;
}

std::string value_field_csv(const ValueField& v, const SmoothedField* psi, const std::vector<std::string>& state_vars) {
    std::vector<std::string> cols = state_vars;
    for (double T : v.horizons) cols.push_back("V_T=" + number(T));
    cols.emplace_back("converged");
    cols.emplace_back("blew_up");
    if (psi) {
        cols.emplace_back("psi");
        cols.emplace_back("sigma");
        cols.emplace_back("bound_ok");
    }
    std::string out = header(cols) + "\n";
    for (std::size_t i = 0; i < v.grid.size(); ++i) {
        std::vector<double> x = v.grid.point(i);
        for (std::size_t d = 0; d < x.size(); ++d) out += (d ? "," : "") + csv_number(x[d]);
        for (const auto& col : v.values) out += "," + csv_number(col[i]);
        out += std::string(",") + (v.converged[i] ? "1" : "0") + "," + (v.blew_up[i] ? "1" : "0");
        if (psi) out += "," + csv_number(psi->values[i]) + "," + csv_number(psi->sigma[i]) + "," +
                        (psi->bound_ok[i] ? "1" : "0");
        out += "\n";
    }
    return out;
}

} // namespace barrier::report
