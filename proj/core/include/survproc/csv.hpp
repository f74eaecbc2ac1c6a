#pragma once

#include <iosfwd>
#include <string>

#include "survproc/types.hpp"

namespace survproc {

/// Long-format patient data: header `patient_id,time,value`, one row per
/// measurement, value either a real number or the token FLAT. Rows may
/// arrive unsorted; they are ordered by time per patient on read.
///
/// Event data: header `patient_id,terminal_time,status,arm` with status
/// 1 = death, 0 = censored.
///
/// Numeric output uses 17 significant digits so that write/read round-trips
/// are exact.

Dataset read_dataset(const std::string& data_csv_path, const std::string& events_csv_path);
Dataset read_dataset(std::istream& data_csv, std::istream& events_csv);

void write_dataset(const Dataset& ds, const std::string& data_csv_path,
                   const std::string& events_csv_path);
void write_data_csv(const Dataset& ds, std::ostream& out);
void write_events_csv(const Dataset& ds, std::ostream& out);

/// 17-significant-digit representation, stable under parse round-trips.
std::string format_double(double v);

} // namespace survproc
