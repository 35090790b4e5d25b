#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "engage/types.hpp"

namespace engage {

/// Fixed offset of local wall-clock time from UTC, in hours (e.g. +10 for AEST).
struct TimeZone {
    double offset_hours = 0.0;
    double offset_seconds() const noexcept { return offset_hours * 3600.0; }
};

Date local_date(double utc_seconds, TimeZone tz);
double local_seconds_of_day(double utc_seconds, TimeZone tz);
double utc_from_local(Date date, double local_seconds_of_day, TimeZone tz);

std::string format_date(Date d);
/// "YYYY-MM-DD"; throws ValidationError otherwise.
Date parse_date(std::string_view s);
/// "HH:MM" or "HH:MM:SS" to seconds after midnight.
std::optional<double> parse_clock(std::string_view s);
std::string format_clock(double seconds_of_day);

}  // namespace engage
