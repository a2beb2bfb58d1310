#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace stes {

/// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
/// Panels use dates for their timelines; all arithmetic is in whole days.
class Date {
public:
    Date() = default;

    static Date from_ymd(int year, int month, int day);
    static Date from_days(std::int64_t d) {
        Date x;
        x.days_ = d;
        return x;
    }

    /// Parses "YYYY-MM-DD". Throws DataError on malformed input.
    static Date parse(const std::string& iso);

    std::string to_string() const;

    std::int64_t days() const noexcept { return days_; }

    Date operator+(std::int64_t n) const { return from_days(days_ + n); }
    Date operator-(std::int64_t n) const { return from_days(days_ - n); }
    std::int64_t operator-(Date rhs) const { return days_ - rhs.days_; }

    auto operator<=>(const Date&) const = default;

private:
    std::int64_t days_ = 0;
};

}  // namespace stes
