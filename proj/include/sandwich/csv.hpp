#pragma once

#include <string>
#include <vector>

namespace sandwich {

// Shortest decimal that round-trips to the same double (std::to_chars).
std::string format_double(double v);

struct ReportRow {
  int s = 0, t = 0;
  std::string claim_id;
  std::string quantity;
  std::string cell_id;
  double value = 0.0;
};

// Header "s,t,claim_id,quantity,cell_id,value" plus one line per row.
std::string to_csv(const std::vector<ReportRow>& rows);

}  // namespace sandwich
