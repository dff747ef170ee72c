#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pacecurve/errors.hpp"

namespace pacecurve {

constexpr double kSegmentLengthM = 50.0;

enum class AgeGroup { U18, U21, U23, Open };
enum class EventType { Domestic, WorldCupJuniors, WorldChampsOlympics };
enum class RacePhase { Heat, SemiFinal, Final };

inline const char* to_string(AgeGroup g) {
  switch (g) {
    case AgeGroup::U18: return "U18";
    case AgeGroup::U21: return "U21";
    case AgeGroup::U23: return "U23";
    case AgeGroup::Open: return "OPEN";
  }
  return "?";
}

inline const char* to_string(EventType e) {
  switch (e) {
    case EventType::Domestic: return "DOM";
    case EventType::WorldCupJuniors: return "WCJ";
    case EventType::WorldChampsOlympics: return "WCO";
  }
  return "?";
}

inline const char* to_string(std::optional<RacePhase> p) {
  if (!p) return "NA";
  switch (*p) {
    case RacePhase::Heat: return "HEAT";
    case RacePhase::SemiFinal: return "SEMI";
    case RacePhase::Final: return "FINAL";
  }
  return "?";
}

struct RaceDate {
  int year = 0;
  int month = 0;
  int day = 0;

  bool ok() const {
    using namespace std::chrono;
    return year_month_day{std::chrono::year{year}, std::chrono::month{(unsigned)month},
                          std::chrono::day{(unsigned)day}}
        .ok();
  }
  // Days since civil epoch; used for ordering and synthetic calendars.
  long serial() const {
    using namespace std::chrono;
    return sys_days{year_month_day{std::chrono::year{year},
                                   std::chrono::month{(unsigned)month},
                                   std::chrono::day{(unsigned)day}}}
        .time_since_epoch()
        .count();
  }
  static RaceDate from_serial(long days) {
    using namespace std::chrono;
    year_month_day ymd{sys_days{std::chrono::days{days}}};
    return RaceDate{(int)ymd.year(), (int)(unsigned)ymd.month(),
                    (int)(unsigned)ymd.day()};
  }
  std::string to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
  }
  friend auto operator<=>(const RaceDate& a, const RaceDate& b) {
    return std::tie(a.year, a.month, a.day) <=> std::tie(b.year, b.month, b.day);
  }
  friend bool operator==(const RaceDate&, const RaceDate&) = default;
};

struct RaceRecord {
  std::string athlete_id;
  RaceDate race_date;
  int distance_m = 0;
  std::vector<double> segment_times_s;
  AgeGroup age_group = AgeGroup::Open;
  EventType event_type = EventType::Domestic;
  std::optional<RacePhase> race_phase;

  int n_segments() const { return distance_m / 50; }

  // Throws on invariant breach; constructing callers must have validated
  // race-specific constraints (500/1000 only) already where they apply.
  void validate() const {
    if (distance_m <= 0 || distance_m % 50 != 0)
      throw Error("RaceRecord: distance_m must be a positive multiple of 50");
    if ((int)segment_times_s.size() != n_segments())
      throw Error("RaceRecord: expected " + std::to_string(n_segments()) +
                  " segment times, got " +
                  std::to_string(segment_times_s.size()));
    for (double t : segment_times_s)
      if (!(t > 0.0) || !std::isfinite(t))
        throw Error("RaceRecord: segment times must be positive and finite");
    if (!race_date.ok())
      throw Error("RaceRecord: invalid date " + race_date.to_string());
  }
};

struct VelocityProfile {
  int distance_m = 0;
  std::vector<double> grid_m;  // segment midpoints: 25, 75, ...
  std::vector<double> v_norm;  // segment velocity / whole-race average
};

struct CareerRace {
  VelocityProfile profile;
  AgeGroup age_group = AgeGroup::Open;
  EventType event_type = EventType::Domestic;
  std::optional<RacePhase> race_phase;
  RaceDate race_date;
};

struct CareerSequence {
  std::string athlete_id;
  int distance_m = 0;
  std::vector<CareerRace> races;
};

// Segment velocity over whole-race average velocity. The harmonic mean of
// the result is exactly 1 because all segments cover the same distance.
inline VelocityProfile normalize_profile(const RaceRecord& rec) {
  rec.validate();
  const int n = rec.n_segments();
  double total_time = 0.0;
  for (double t : rec.segment_times_s) total_time += t;
  const double avg_velocity = rec.distance_m / total_time;

  VelocityProfile p;
  p.distance_m = rec.distance_m;
  p.grid_m.resize(n);
  p.v_norm.resize(n);
  for (int i = 0; i < n; ++i) {
    p.grid_m[i] = kSegmentLengthM * i + kSegmentLengthM / 2.0;
    p.v_norm[i] = (kSegmentLengthM / rec.segment_times_s[i]) / avg_velocity;
  }
  return p;
}

inline VelocityProfile mean_profile(const std::vector<VelocityProfile>& profiles) {
  if (profiles.empty()) throw EmptyInput("mean_profile");
  const auto& first = profiles.front();
  for (const auto& p : profiles)
    if (p.distance_m != first.distance_m || p.grid_m != first.grid_m)
      throw GridMismatch();

  VelocityProfile mean;
  mean.distance_m = first.distance_m;
  mean.grid_m = first.grid_m;
  mean.v_norm.assign(first.v_norm.size(), 0.0);
  for (const auto& p : profiles)
    for (size_t i = 0; i < p.v_norm.size(); ++i) mean.v_norm[i] += p.v_norm[i];
  for (double& v : mean.v_norm) v /= (double)profiles.size();
  return mean;
}

// ---- CSV schema ----
// athlete_id,race_date,distance_m,age_group,event_type,race_phase,t1,...,tN
// N = distance_m/50. Files mixing 500 m and 1000 m rows pad short rows with
// trailing empty cells up to the header width.

struct BadRow {
  int line = 0;  // 1-based line number in the input
  std::string reason;
};

struct ParseResult {
  std::vector<RaceRecord> records;
  std::vector<BadRow> rejects;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

inline bool parse_int(std::string_view s, int& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

inline bool parse_age_group(std::string_view s, AgeGroup& out) {
  if (s == "U18") out = AgeGroup::U18;
  else if (s == "U21") out = AgeGroup::U21;
  else if (s == "U23") out = AgeGroup::U23;
  else if (s == "OPEN") out = AgeGroup::Open;
  else return false;
  return true;
}

inline bool parse_event_type(std::string_view s, EventType& out) {
  if (s == "DOM") out = EventType::Domestic;
  else if (s == "WCJ") out = EventType::WorldCupJuniors;
  else if (s == "WCO") out = EventType::WorldChampsOlympics;
  else return false;
  return true;
}

inline bool parse_race_phase(std::string_view s, std::optional<RacePhase>& out) {
  if (s == "HEAT") out = RacePhase::Heat;
  else if (s == "SEMI") out = RacePhase::SemiFinal;
  else if (s == "FINAL") out = RacePhase::Final;
  else if (s == "NA") out = std::nullopt;
  else return false;
  return true;
}

inline bool parse_date(std::string_view s, RaceDate& out) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  int y, m, d;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), m) ||
      !parse_int(s.substr(8, 2), d))
    return false;
  out = RaceDate{y, m, d};
  return out.ok();
}

// %.17g round-trips doubles exactly; force ">= 3 decimal places" for values
// that would print as integers.
inline std::string format_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", t);
  std::string s(buf);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find('E') == std::string::npos) {
    std::snprintf(buf, sizeof(buf), "%.3f", t);
    s = buf;
  }
  return s;
}

}  // namespace detail

inline const std::array<std::string_view, 6> kCsvFixedColumns = {
    "athlete_id", "race_date", "distance_m",
    "age_group",  "event_type", "race_phase"};

inline ParseResult parse_race_csv(std::string_view text) {
  // Split into lines, tolerating \r\n and a trailing newline.
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (start <= text.size()) {
    size_t pos = text.find('\n', start);
    std::string_view line = (pos == std::string_view::npos)
                                ? text.substr(start)
                                : text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();

  if (lines.empty()) throw EmptyFile();

  auto header = detail::split_csv_line(lines[0]);
  if (header.size() < kCsvFixedColumns.size() + 1)
    throw MalformedHeader("expected at least 7 columns");
  for (size_t i = 0; i < kCsvFixedColumns.size(); ++i)
    if (header[i] != kCsvFixedColumns[i])
      throw MalformedHeader("column " + std::to_string(i + 1) + " must be '" +
                            std::string(kCsvFixedColumns[i]) + "'");
  const int header_splits = (int)(header.size() - kCsvFixedColumns.size());
  for (int i = 0; i < header_splits; ++i) {
    std::string expected = "t" + std::to_string(i + 1);
    if (header[kCsvFixedColumns.size() + i] != expected)
      throw MalformedHeader("split column " + std::to_string(i + 1) +
                            " must be '" + expected + "'");
  }

  if (lines.size() == 1) throw EmptyFile();

  ParseResult result;
  for (size_t li = 1; li < lines.size(); ++li) {
    const int line_no = (int)li + 1;
    if (lines[li].empty()) continue;
    auto fields = detail::split_csv_line(lines[li]);
    auto reject = [&](const std::string& reason) {
      result.rejects.push_back(BadRow{line_no, reason});
    };

    if (fields.size() < kCsvFixedColumns.size() + 1) {
      reject("too few fields");
      continue;
    }

    RaceRecord rec;
    rec.athlete_id = std::string(fields[0]);
    if (rec.athlete_id.empty()) {
      reject("empty athlete_id");
      continue;
    }
    if (!detail::parse_date(fields[1], rec.race_date)) {
      reject("bad race_date '" + std::string(fields[1]) + "'");
      continue;
    }
    if (!detail::parse_int(fields[2], rec.distance_m) ||
        (rec.distance_m != 500 && rec.distance_m != 1000)) {
      reject("distance_m must be 500 or 1000");
      continue;
    }
    if (!detail::parse_age_group(fields[3], rec.age_group)) {
      reject("bad age_group '" + std::string(fields[3]) + "'");
      continue;
    }
    if (!detail::parse_event_type(fields[4], rec.event_type)) {
      reject("bad event_type '" + std::string(fields[4]) + "'");
      continue;
    }
    if (!detail::parse_race_phase(fields[5], rec.race_phase)) {
      reject("bad race_phase '" + std::string(fields[5]) + "'");
      continue;
    }

    const int n_segments = rec.distance_m / 50;
    // Count non-empty time fields; only trailing padding cells may be empty.
    int n_times = 0;
    bool malformed = false;
    for (size_t f = kCsvFixedColumns.size(); f < fields.size(); ++f) {
      if (fields[f].empty()) {
        for (size_t g = f; g < fields.size(); ++g)
          if (!fields[g].empty()) malformed = true;
        break;
      }
      ++n_times;
    }
    if (malformed) {
      reject("empty split cell before the last non-empty one");
      continue;
    }
    if (n_times != n_segments) {
      reject("expected " + std::to_string(n_segments) + " split times, got " +
             std::to_string(n_times));
      continue;
    }
    rec.segment_times_s.resize(n_segments);
    bool bad_time = false;
    for (int i = 0; i < n_segments; ++i) {
      double t;
      if (!detail::parse_double(fields[kCsvFixedColumns.size() + i], t) ||
          !std::isfinite(t) || t <= 0.0) {
        reject("split t" + std::to_string(i + 1) + " must be a positive number");
        bad_time = true;
        break;
      }
      rec.segment_times_s[i] = t;
    }
    if (bad_time) continue;

    result.records.push_back(std::move(rec));
  }
  return result;
}

// Inverse of parse_race_csv on valid records. The header is sized to the
// longest race in the batch; shorter rows get trailing padding cells.
inline std::string serialize_race_csv(const std::vector<RaceRecord>& records) {
  int max_segments = 10;
  for (const auto& r : records) max_segments = std::max(max_segments, r.n_segments());

  std::ostringstream out;
  out << "athlete_id,race_date,distance_m,age_group,event_type,race_phase";
  for (int i = 1; i <= max_segments; ++i) out << ",t" << i;
  out << "\n";
  for (const auto& r : records) {
    out << r.athlete_id << ',' << r.race_date.to_string() << ',' << r.distance_m
        << ',' << to_string(r.age_group) << ',' << to_string(r.event_type) << ','
        << to_string(r.race_phase);
    for (double t : r.segment_times_s) out << ',' << detail::format_time(t);
    for (int i = r.n_segments(); i < max_segments; ++i) out << ',';
    out << "\n";
  }
  return out.str();
}

struct DuplicateRace {
  std::string athlete_id;
  RaceDate race_date;
  std::optional<RacePhase> race_phase;
};

struct CareerBuildResult {
  std::vector<CareerSequence> sequences;
  std::vector<DuplicateRace> duplicates;  // warnings; duplicates are kept
};

// Heats and finals legitimately share a date; ties are ordered
// Heat < SemiFinal < Final < NA, then input order.
inline int phase_rank(std::optional<RacePhase> p) {
  if (!p) return 3;
  return (int)*p;
}

inline CareerBuildResult build_career_sequences(
    const std::vector<RaceRecord>& records) {
  std::map<std::pair<std::string, int>, std::vector<const RaceRecord*>> groups;
  for (const auto& r : records)
    groups[{r.athlete_id, r.distance_m}].push_back(&r);

  CareerBuildResult result;
  for (auto& [key, group] : groups) {
    std::stable_sort(group.begin(), group.end(),
                     [](const RaceRecord* a, const RaceRecord* b) {
                       if (a->race_date != b->race_date)
                         return a->race_date < b->race_date;
                       return phase_rank(a->race_phase) < phase_rank(b->race_phase);
                     });
    CareerSequence seq;
    seq.athlete_id = key.first;
    seq.distance_m = key.second;
    for (size_t i = 0; i < group.size(); ++i) {
      const RaceRecord& r = *group[i];
      if (i > 0 && group[i - 1]->race_date == r.race_date &&
          group[i - 1]->race_phase == r.race_phase)
        result.duplicates.push_back(
            DuplicateRace{r.athlete_id, r.race_date, r.race_phase});
      seq.races.push_back(CareerRace{normalize_profile(r), r.age_group,
                                     r.event_type, r.race_phase, r.race_date});
    }
    result.sequences.push_back(std::move(seq));
  }
  return result;
}

}  // namespace pacecurve
