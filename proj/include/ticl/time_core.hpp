#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ticl {

inline constexpr int kMinutesPerDay = 1440;

/// Raised for malformed user-supplied values (clock strings, label spaces, file contents).
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A wall-clock time of day with minute resolution.
class ClockTime {
public:
  constexpr ClockTime() = default;

  /// Throws ValidationError unless 0 <= minute_of_day < 1440.
  explicit ClockTime(int minute_of_day) : minute_(minute_of_day) {
    if (minute_of_day < 0 || minute_of_day >= kMinutesPerDay)
      throw ValidationError("minute_of_day " + std::to_string(minute_of_day) +
                            " outside [0, 1440)");
  }

  /// Wraps any integer onto the clock face.
  static ClockTime wrap(long long minutes) {
    long long m = minutes % kMinutesPerDay;
    if (m < 0) m += kMinutesPerDay;
    return ClockTime(static_cast<int>(m));
  }

  constexpr int minute_of_day() const { return minute_; }
  constexpr int hour() const { return minute_ / 60; }
  constexpr int minute() const { return minute_ % 60; }

  friend constexpr bool operator==(ClockTime a, ClockTime b) = default;

private:
  int minute_ = 0;
};

namespace detail {

inline int parse_two_digits(std::string_view text, std::string_view field) {
  if (text.size() != 2 || text[0] < '0' || text[0] > '9' || text[1] < '0' || text[1] > '9')
    throw ValidationError("clock field " + std::string(field) + ": expected two digits, got '" +
                          std::string(text) + "'");
  return (text[0] - '0') * 10 + (text[1] - '0');
}

}  // namespace detail

/// Parses "HH:MM" (24-hour clock).
inline ClockTime parse_clock(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw ValidationError("clock string '" + std::string(text) + "': missing ':' separator");
  const int hh = detail::parse_two_digits(text.substr(0, colon), "HH");
  const int mm = detail::parse_two_digits(text.substr(colon + 1), "MM");
  if (hh > 23) throw ValidationError("clock field HH: " + std::to_string(hh) + " exceeds 23");
  if (mm > 59) throw ValidationError("clock field MM: " + std::to_string(mm) + " exceeds 59");
  return ClockTime(hh * 60 + mm);
}

inline std::string format_clock(ClockTime t) {
  std::string out(5, ':');
  out[0] = static_cast<char>('0' + t.hour() / 10);
  out[1] = static_cast<char>('0' + t.hour() % 10);
  out[3] = static_cast<char>('0' + t.minute() / 10);
  out[4] = static_cast<char>('0' + t.minute() % 10);
  return out;
}

/// Circular distance on the 1440-minute clock; always in [0, 720].
inline int circular_diff(ClockTime a, ClockTime b) {
  const int d = std::abs(a.minute_of_day() - b.minute_of_day());
  return d < kMinutesPerDay - d ? d : kMinutesPerDay - d;
}

struct LabelFactor {
  std::string name;
  int cardinality = 0;
};

/// Partition of the day into `time_classes` equal bins, optionally crossed with
/// other attributes. Flat indices are row-major with the time-of-day bin varying
/// fastest: index = factor_index * time_classes + time_bin.
class TimeLabelSpace {
public:
  TimeLabelSpace() : TimeLabelSpace(24) {}

  explicit TimeLabelSpace(int time_classes, std::vector<LabelFactor> factors = {})
      : time_classes_(time_classes), factors_(std::move(factors)) {
    if (time_classes_ < 2)
      throw ValidationError("time classes must be >= 2, got " + std::to_string(time_classes_));
    if (kMinutesPerDay % time_classes_ != 0)
      throw ValidationError("time classes " + std::to_string(time_classes_) +
                            " must divide 1440");
    total_ = time_classes_;
    for (const auto& f : factors_) {
      if (f.name != "month")
        throw ValidationError("unsupported label factor '" + f.name + "' (supported: month)");
      if (f.cardinality != 12)
        throw ValidationError("label factor 'month' must have cardinality 12");
      total_ *= f.cardinality;
    }
  }

  int time_classes() const { return time_classes_; }
  int num_classes() const { return total_; }
  int bin_minutes() const { return kMinutesPerDay / time_classes_; }
  const std::vector<LabelFactor>& factors() const { return factors_; }
  bool is_product() const { return !factors_.empty(); }

  /// Time-of-day bin of a flat class index.
  int time_bin(int idx) const { return idx % time_classes_; }

private:
  int time_classes_;
  std::vector<LabelFactor> factors_;
  int total_ = 0;
};

/// Time-of-day bin of `t`.
inline int class_of(ClockTime t, const TimeLabelSpace& space) {
  return t.minute_of_day() / space.bin_minutes();
}

/// Midpoint of the time-of-day bin of a (possibly flat product) class index.
inline ClockTime class_midpoint(int idx, const TimeLabelSpace& space) {
  if (idx < 0 || idx >= space.num_classes())
    throw std::out_of_range("class index " + std::to_string(idx) + " outside label space");
  const int w = space.bin_minutes();
  return ClockTime(space.time_bin(idx) * w + w / 2);
}

inline std::vector<double> one_hot(int idx, int num_classes) {
  if (idx < 0 || idx >= num_classes)
    throw std::out_of_range("one_hot index " + std::to_string(idx) + " outside [0, " +
                            std::to_string(num_classes) + ")");
  std::vector<double> v(static_cast<std::size_t>(num_classes), 0.0);
  v[static_cast<std::size_t>(idx)] = 1.0;
  return v;
}

struct FeatureRecord {
  std::string id;
  std::vector<double> features;
  ClockTime time;
  std::optional<double> lat;
  std::optional<double> lon;
  std::optional<std::string> date;  // "YYYY-MM-DD"
  std::optional<double> brightness;
};

struct Dataset {
  int dim = 0;
  std::vector<FeatureRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

/// Checks the per-record invariants of a dataset: uniform dim, finite values, metadata ranges.
inline void validate_dataset(const Dataset& ds) {
  if (ds.dim < 1 && !ds.empty()) throw ValidationError("dataset dim must be >= 1");
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    const std::string where = "record " + std::to_string(i) + " ('" + r.id + "')";
    if (static_cast<int>(r.features.size()) != ds.dim)
      throw ValidationError(where + ": feature length " + std::to_string(r.features.size()) +
                            " != dataset dim " + std::to_string(ds.dim));
    for (double v : r.features)
      if (!std::isfinite(v)) throw ValidationError(where + ": non-finite feature value");
    if (r.lat && (*r.lat < -90.0 || *r.lat > 90.0))
      throw ValidationError(where + ": lat outside [-90, 90]");
    if (r.lon && (*r.lon < -180.0 || *r.lon > 180.0))
      throw ValidationError(where + ": lon outside [-180, 180]");
    if (r.brightness && (*r.brightness < 0.0 || *r.brightness > 255.0))
      throw ValidationError(where + ": brightness outside [0, 255]");
  }
}

/// Month (1..12) from a "YYYY-MM-DD" date string.
inline int month_of(const std::string& date) {
  if (date.size() != 10 || date[4] != '-' || date[7] != '-')
    throw ValidationError("date '" + date + "': expected YYYY-MM-DD");
  const int m = detail::parse_two_digits(std::string_view(date).substr(5, 2), "month");
  if (m < 1 || m > 12) throw ValidationError("date '" + date + "': month outside 1..12");
  return m;
}

/// Flat class index of a record, resolving product factors from its metadata.
inline int label_of(const FeatureRecord& r, const TimeLabelSpace& space) {
  int idx = class_of(r.time, space);
  int stride = space.time_classes();
  for (const auto& f : space.factors()) {
    // only "month" is admitted by TimeLabelSpace
    if (!r.date) throw ValidationError("record '" + r.id + "': month factor needs a date");
    idx += (month_of(*r.date) - 1) * stride;
    stride *= f.cardinality;
  }
  return idx;
}

inline std::vector<int> labels_of(const Dataset& ds, const TimeLabelSpace& space) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records) out.push_back(label_of(r, space));
  return out;
}

}  // namespace ticl
