#include "sandwich/csv.hpp"

#include <charconv>
#include <sstream>

namespace sandwich {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string to_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "s,t,claim_id,quantity,cell_id,value\n";
  for (const auto& r : rows)
    os << r.s << ',' << r.t << ',' << r.claim_id << ',' << r.quantity << ',' << r.cell_id
       << ',' << format_double(r.value) << '\n';
  return os.str();
}

}  // namespace sandwich
