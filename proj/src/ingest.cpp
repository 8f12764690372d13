#include "tollcast/ingest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace tollcast {

std::string to_string(VehicleType t) {
  switch (t) {
    case VehicleType::Car: return "Car";
    case VehicleType::Bus: return "Bus";
    case VehicleType::Truck: return "Truck";
  }
  return "Car";
}

std::string to_string(Weather w) {
  switch (w) {
    case Weather::Clear: return "Clear";
    case Weather::Rain: return "Rain";
    case Weather::HeavyRain: return "HeavyRain";
  }
  return "Clear";
}

std::optional<VehicleType> vehicle_type_from_string(const std::string& s) {
  if (s == "Car") return VehicleType::Car;
  if (s == "Bus") return VehicleType::Bus;
  if (s == "Truck") return VehicleType::Truck;
  return std::nullopt;
}

std::optional<Weather> weather_from_string(const std::string& s) {
  if (s == "Clear") return Weather::Clear;
  if (s == "Rain") return Weather::Rain;
  if (s == "HeavyRain") return Weather::HeavyRain;
  return std::nullopt;
}

TimeSlot slot_of(Timestamp t, int width_min) {
  if (width_min <= 0 || kMinutesPerDay % width_min != 0)
    throw std::invalid_argument("slot width must divide 1440 minutes");
  int minutes = seconds_into_day(t) / 60;
  return {minutes / width_min, width_min};
}

std::string trip_uid(const Transaction& txn) {
  return txn.vehicle_id + "/" + std::to_string(txn.entry_time);
}

Trip make_trip(const Transaction& txn, int slot_width_min) {
  Trip t;
  t.txn = txn;
  t.duration_s = static_cast<double>(txn.exit_time - txn.entry_time);
  t.origin_slot = slot_of(txn.entry_time, slot_width_min);
  return t;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

struct Interval {
  Timestamp entry;
  Timestamp exit;
};

}  // namespace

ParseResult parse_transactions(std::istream& in, const HighwayGraph& graph) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  // Per-vehicle accepted intervals for duplicate/overlap detection. When two
  // records of one vehicle overlap in time, the record encountered later in
  // the stream is rejected (streams are chronological in practice, so this
  // rejects the later trip).
  std::unordered_map<std::string, std::vector<Interval>> intervals;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;  // header line
    }
    auto f = split_csv(line);
    auto reject = [&](const std::string& reason) {
      result.rejected.push_back({line_no, reason});
    };
    if (f.size() != 8) {
      reject("bad field count");
      continue;
    }
    Transaction txn;
    txn.vehicle_id = f[0];
    if (txn.vehicle_id.empty()) {
      reject("empty vehicle id");
      continue;
    }
    auto vt = vehicle_type_from_string(f[1]);
    if (!vt) {
      reject("unknown vehicle type");
      continue;
    }
    txn.vehicle_type = *vt;
    txn.entry_station = f[2];
    txn.exit_station = f[4];
    if (!graph.has_station(txn.entry_station) ||
        !graph.has_station(txn.exit_station)) {
      reject("unknown station");
      continue;
    }
    if (txn.entry_station == txn.exit_station) {
      reject("same entry and exit station");
      continue;
    }
    try {
      txn.entry_time = parse_timestamp(f[3]);
      txn.exit_time = parse_timestamp(f[5]);
    } catch (const std::invalid_argument&) {
      reject("bad timestamp");
      continue;
    }
    if (txn.exit_time <= txn.entry_time) {
      reject("non-positive duration");
      continue;
    }
    try {
      txn.axle_count = std::stoi(f[6]);
      txn.weight_kg = std::stod(f[7]);
    } catch (const std::exception&) {
      reject("bad numeric field");
      continue;
    }
    if (txn.axle_count <= 0) {
      reject("bad axle count");
      continue;
    }
    if (txn.weight_kg < 0) {
      reject("negative weight");
      continue;
    }
    auto& iv = intervals[txn.vehicle_id];
    bool duplicate = false, overlap = false;
    for (const auto& existing : iv) {
      if (existing.entry == txn.entry_time) {
        duplicate = true;
        break;
      }
      if (txn.entry_time < existing.exit && existing.entry < txn.exit_time) {
        overlap = true;
        break;
      }
    }
    if (duplicate) {
      reject("duplicate transaction");
      continue;
    }
    if (overlap) {
      reject("overlapping trip");
      continue;
    }
    iv.push_back({txn.entry_time, txn.exit_time});
    result.accepted.push_back(std::move(txn));
  }
  if (in.bad()) throw std::runtime_error("transaction stream read error");
  return result;
}

ParseResult parse_transactions_file(const std::string& path,
                                    const HighwayGraph& graph) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open transaction file " + path);
  return parse_transactions(in, graph);
}

void serialize_transactions(std::ostream& out,
                            std::span<const Transaction> txns) {
  out << kTransactionHeader << "\n";
  char buf[64];
  for (const auto& t : txns) {
    std::snprintf(buf, sizeof(buf), "%d,%.1f", t.axle_count, t.weight_kg);
    out << t.vehicle_id << ',' << to_string(t.vehicle_type) << ','
        << t.entry_station << ',' << format_timestamp(t.entry_time) << ','
        << t.exit_station << ',' << format_timestamp(t.exit_time) << ',' << buf
        << "\n";
  }
}

void ContextCalendar::add(const ContextRecord& rec) {
  ContextRecord r = rec;
  r.day_of_week = day_of_week(r.day);
  r.is_weekend = is_weekend_day(r.day_of_week);
  days_[r.day] = r;
}

const ContextRecord* ContextCalendar::find(std::int64_t day) const {
  auto it = days_.find(day);
  return it == days_.end() ? nullptr : &it->second;
}

ContextRecord ContextCalendar::at_time(Timestamp t) const {
  std::int64_t day = day_number(t);
  if (const auto* rec = find(day)) return *rec;
  ContextRecord rec;
  rec.day = day;
  rec.day_of_week = day_of_week(day);
  rec.is_weekend = is_weekend_day(rec.day_of_week);
  return rec;
}

ContextCalendar ContextCalendar::load(std::istream& in) {
  ContextCalendar cal;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    auto f = split_csv(line);
    if (f.size() != 4)
      throw std::invalid_argument("context line " + std::to_string(line_no) +
                                  ": need 4 fields");
    ContextRecord rec;
    rec.day = parse_date(f[0]);
    rec.day_of_week = std::stoi(f[1]);
    rec.is_holiday = (f[2] == "1" || f[2] == "true");
    auto w = weather_from_string(f[3]);
    if (!w)
      throw std::invalid_argument("context line " + std::to_string(line_no) +
                                  ": unknown weather '" + f[3] + "'");
    rec.weather = *w;
    if (rec.day_of_week != day_of_week(rec.day))
      throw std::invalid_argument("context line " + std::to_string(line_no) +
                                  ": day_of_week mismatch for " + f[0]);
    cal.add(rec);
  }
  return cal;
}

ContextCalendar ContextCalendar::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open context file " + path);
  return load(in);
}

void ContextCalendar::save(std::ostream& out) const {
  out << "date,day_of_week,is_holiday,weather\n";
  for (const auto& [day, rec] : days_) {
    out << format_date(day) << ',' << rec.day_of_week << ','
        << (rec.is_holiday ? 1 : 0) << ',' << to_string(rec.weather) << "\n";
  }
}

void ContextCalendar::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write context file " + path);
  save(out);
}

std::map<std::string, std::vector<Trip>> build_vehicle_history(
    std::span<const Transaction> txns, int slot_width_min) {
  std::map<std::string, std::vector<Trip>> history;
  for (const auto& txn : txns)
    history[txn.vehicle_id].push_back(make_trip(txn, slot_width_min));
  for (auto& [vid, trips] : history) {
    std::sort(trips.begin(), trips.end(), [](const Trip& a, const Trip& b) {
      if (a.txn.entry_time != b.txn.entry_time)
        return a.txn.entry_time < b.txn.entry_time;
      if (a.txn.exit_time != b.txn.exit_time)
        return a.txn.exit_time < b.txn.exit_time;
      return a.txn.exit_station < b.txn.exit_station;
    });
  }
  return history;
}

}  // namespace tollcast
