#ifndef RTESTIM_CORE_FORMAT_HPP
#define RTESTIM_CORE_FORMAT_HPP

#include <string>

namespace rtestim::core {

/// Shortest decimal text that round-trips to the same double; "NA" for NaN.
std::string format_number(double value);

}  // namespace rtestim::core

#endif  // RTESTIM_CORE_FORMAT_HPP
