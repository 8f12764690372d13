#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tollcast/graph.hpp"
#include "tollcast/timeutil.hpp"

namespace tollcast {

enum class VehicleType { Car, Bus, Truck };
enum class Weather { Clear, Rain, HeavyRain };

std::string to_string(VehicleType t);
std::string to_string(Weather w);
std::optional<VehicleType> vehicle_type_from_string(const std::string& s);
std::optional<Weather> weather_from_string(const std::string& s);

struct TimeSlot {
  int index = 0;
  int width_min = 30;

  bool operator==(const TimeSlot& o) const {
    return index == o.index && width_min == o.width_min;
  }
};

/// Slot containing a timestamp: floor(minutes-since-midnight / width).
/// width_min must divide 1440.
TimeSlot slot_of(Timestamp t, int width_min);

struct Transaction {
  std::string vehicle_id;
  VehicleType vehicle_type = VehicleType::Car;
  std::string entry_station;
  Timestamp entry_time = 0;
  std::string exit_station;
  Timestamp exit_time = 0;
  int axle_count = 2;
  double weight_kg = 0.0;
};

/// Stable identifier of a trip: vehicle plus entry timestamp.
std::string trip_uid(const Transaction& txn);

struct Trip {
  Transaction txn;
  double duration_s = 0.0;
  TimeSlot origin_slot;
};

Trip make_trip(const Transaction& txn, int slot_width_min = 30);

/// A trip with a (known or inferred) route attached.
struct RoutedTrip {
  Trip trip;
  Route route;
};

struct RejectReport {
  std::size_t line_no = 0;
  std::string reason;
};

struct ParseResult {
  std::vector<Transaction> accepted;
  std::vector<RejectReport> rejected;
};

constexpr const char* kTransactionHeader =
    "vehicle_id,vehicle_type,entry_station,entry_time,exit_station,exit_time,"
    "axle_count,weight_kg";

/// Parses the documented transaction format. Malformed records become
/// RejectReports; the stream as a whole only fails on I/O errors.
ParseResult parse_transactions(std::istream& in, const HighwayGraph& graph);
ParseResult parse_transactions_file(const std::string& path,
                                    const HighwayGraph& graph);

void serialize_transactions(std::ostream& out,
                            std::span<const Transaction> txns);

struct ContextRecord {
  std::int64_t day = 0;  // days since 1970-01-01
  int day_of_week = 1;
  bool is_weekend = false;
  bool is_holiday = false;
  Weather weather = Weather::Clear;
};

class ContextCalendar {
 public:
  void add(const ContextRecord& rec);
  const ContextRecord* find(std::int64_t day) const;
  /// Record for the day containing t; a default clear weekday record is
  /// synthesized when the calendar has no entry.
  ContextRecord at_time(Timestamp t) const;
  const std::map<std::int64_t, ContextRecord>& records() const { return days_; }

  static ContextCalendar load(std::istream& in);
  static ContextCalendar load_file(const std::string& path);
  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;

 private:
  std::map<std::int64_t, ContextRecord> days_;
};

/// Groups transactions into per-vehicle trips sorted by entry time.
/// Deterministic under input permutation.
std::map<std::string, std::vector<Trip>> build_vehicle_history(
    std::span<const Transaction> txns, int slot_width_min = 30);

}  // namespace tollcast
