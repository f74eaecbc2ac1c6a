#include "survproc/types.hpp"

#include <cmath>
#include <sstream>

namespace survproc {

StateValue StateValue::real(double v) {
    if (!std::isfinite(v)) {
        throw DataError("state value must be finite, got " + std::to_string(v));
    }
    StateValue s;
    s.value_ = v;
    s.flat_ = false;
    return s;
}

double StateValue::value() const {
    if (flat_) throw DataError("absorbing state has no measurement value");
    return value_;
}

std::size_t PatientRecord::n_real() const {
    std::size_t n = 0;
    for (const auto& v : values) {
        if (v.is_flat()) break;
        ++n;
    }
    return n;
}

std::vector<double> PatientRecord::real_times() const {
    const std::size_t n = n_real();
    return {times.begin(), times.begin() + static_cast<std::ptrdiff_t>(std::min(n, times.size()))};
}

std::vector<double> PatientRecord::real_values() const {
    std::vector<double> out;
    out.reserve(n_real());
    for (const auto& v : values) {
        if (v.is_flat()) break;
        out.push_back(v.value());
    }
    return out;
}

std::vector<std::string> validate(const PatientRecord& rec) {
    std::vector<std::string> violations;

    for (std::size_t i = 0; i < rec.times.size(); ++i) {
        if (!(rec.times[i] >= 0.0) || !std::isfinite(rec.times[i])) {
            violations.push_back("sampling time at index " + std::to_string(i) +
                                 " is negative or non-finite");
            break;
        }
    }
    for (std::size_t i = 1; i < rec.times.size(); ++i) {
        if (!(rec.times[i] > rec.times[i - 1])) {
            violations.push_back("sampling times not strictly increasing at index " +
                                 std::to_string(i));
            break;
        }
    }

    if (rec.values.size() != rec.times.size()) {
        violations.push_back("value count " + std::to_string(rec.values.size()) +
                             " does not match time count " + std::to_string(rec.times.size()));
    }

    // Absorbing values must form one contiguous block at the end.
    bool seen_flat = false;
    for (std::size_t i = 0; i < rec.values.size(); ++i) {
        if (rec.values[i].is_flat()) {
            seen_flat = true;
        } else if (seen_flat) {
            violations.push_back("real value after absorbing value at index " +
                                 std::to_string(i));
            break;
        }
    }

    const std::size_t n_real = rec.n_real();
    const bool sizes_match = rec.values.size() == rec.times.size();
    double last_real_time = -1.0;
    if (sizes_match && n_real > 0) last_real_time = rec.times[n_real - 1];
    const double last_time = rec.times.empty() ? 0.0 : rec.times.back();

    if (!std::isfinite(rec.terminal.time) || rec.terminal.time < 0.0) {
        violations.push_back("terminal time is negative or non-finite");
    } else if (rec.terminal.is_death()) {
        if (sizes_match && n_real > 0 && !(last_real_time < rec.terminal.time)) {
            violations.push_back("death time must exceed every real-valued sampling time");
        }
        if (seen_flat) {
            violations.push_back("exact death time recorded together with found-dead values");
        }
    } else {
        if (!rec.times.empty() && rec.terminal.time < last_time) {
            violations.push_back("censoring time precedes the last sampling time");
        }
    }

    return violations;
}

std::vector<std::size_t> Dataset::censored_index() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].terminal.is_death()) idx.push_back(i);
    }
    return idx;
}

std::vector<std::pair<std::size_t, std::vector<std::string>>> Dataset::validate_all() const {
    std::vector<std::pair<std::size_t, std::vector<std::string>>> bad;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto v = validate(records[i]);
        if (!v.empty()) bad.emplace_back(i, std::move(v));
    }
    return bad;
}

} // namespace survproc
