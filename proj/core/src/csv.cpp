#include "survproc/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace survproc {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (const char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::string& what, int line_no) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("line " + std::to_string(line_no) + ": cannot parse " + what +
                        " from '" + s + "'");
    }
}

struct RawObservation {
    double time;
    StateValue value;
};

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Dataset read_dataset(std::istream& data_csv, std::istream& events_csv) {
    std::map<std::string, std::vector<RawObservation>> observations;
    std::string line;
    int line_no = 0;

    // Measurement rows.
    if (!std::getline(data_csv, line)) throw DataError("data CSV is empty");
    ++line_no;
    if (split_csv_line(line) != std::vector<std::string>{"patient_id", "time", "value"}) {
        throw DataError("data CSV header must be 'patient_id,time,value'");
    }
    while (std::getline(data_csv, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 3) {
            throw DataError("data CSV line " + std::to_string(line_no) +
                            ": expected 3 fields, got " + std::to_string(f.size()));
        }
        const double t = parse_double(f[1], "time", line_no);
        StateValue v = f[2] == "FLAT" ? StateValue::flat()
                                      : StateValue::real(parse_double(f[2], "value", line_no));
        observations[f[0]].push_back({t, v});
    }

    // Event rows define the patient set and ordering.
    Dataset ds;
    line_no = 0;
    if (!std::getline(events_csv, line)) throw DataError("events CSV is empty");
    ++line_no;
    if (split_csv_line(line) !=
        std::vector<std::string>{"patient_id", "terminal_time", "status", "arm"}) {
        throw DataError("events CSV header must be 'patient_id,terminal_time,status,arm'");
    }
    while (std::getline(events_csv, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) {
            throw DataError("events CSV line " + std::to_string(line_no) +
                            ": expected 4 fields, got " + std::to_string(f.size()));
        }
        PatientRecord rec;
        rec.patient_id = f[0];
        const double t = parse_double(f[1], "terminal_time", line_no);
        const std::string& status = f[2];
        if (status == "1") {
            rec.terminal = Terminal::death(t);
        } else if (status == "0") {
            rec.terminal = Terminal::censored(t);
        } else {
            throw DataError("events CSV line " + std::to_string(line_no) +
                            ": status must be 0 or 1, got '" + status + "'");
        }
        rec.arm = static_cast<int>(parse_double(f[3], "arm", line_no));

        auto it = observations.find(rec.patient_id);
        if (it != observations.end()) {
            auto& obs = it->second;
            std::stable_sort(obs.begin(), obs.end(),
                             [](const RawObservation& a, const RawObservation& b) {
                                 return a.time < b.time;
                             });
            for (const auto& o : obs) {
                rec.times.push_back(o.time);
                rec.values.push_back(o.value);
            }
            observations.erase(it);
        }
        ds.records.push_back(std::move(rec));
    }

    if (!observations.empty()) {
        throw DataError("data CSV contains patient '" + observations.begin()->first +
                        "' with no matching event row");
    }
    return ds;
}

Dataset read_dataset(const std::string& data_csv_path, const std::string& events_csv_path) {
    std::ifstream data(data_csv_path);
    if (!data) throw DataError("cannot open data CSV '" + data_csv_path + "'");
    std::ifstream events(events_csv_path);
    if (!events) throw DataError("cannot open events CSV '" + events_csv_path + "'");
    return read_dataset(data, events);
}

void write_data_csv(const Dataset& ds, std::ostream& out) {
    out << "patient_id,time,value\n";
    for (const auto& rec : ds.records) {
        for (std::size_t i = 0; i < rec.times.size(); ++i) {
            out << rec.patient_id << ',' << format_double(rec.times[i]) << ',';
            if (rec.values[i].is_flat()) {
                out << "FLAT";
            } else {
                out << format_double(rec.values[i].value());
            }
            out << '\n';
        }
    }
}

void write_events_csv(const Dataset& ds, std::ostream& out) {
    out << "patient_id,terminal_time,status,arm\n";
    for (const auto& rec : ds.records) {
        out << rec.patient_id << ',' << format_double(rec.terminal.time) << ','
            << (rec.terminal.is_death() ? '1' : '0') << ',' << rec.arm << '\n';
    }
}

void write_dataset(const Dataset& ds, const std::string& data_csv_path,
                   const std::string& events_csv_path) {
    std::ofstream data(data_csv_path);
    if (!data) throw DataError("cannot open '" + data_csv_path + "' for writing");
    write_data_csv(ds, data);
    std::ofstream events(events_csv_path);
    if (!events) throw DataError("cannot open '" + events_csv_path + "' for writing");
    write_events_csv(ds, events);
}

} // namespace survproc
