/**
 * @file object_map.hpp
 * @brief Sparse open-set object maps, recency filtering, and the JSON
 *        message format used for inter-robot map sharing.
 */

#ifndef TCAFF_OBJECT_MAP_HPP
#define TCAFF_OBJECT_MAP_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace tcaff {

/// One mapped object: centroid in the owner's odom frame plus width/height
/// descriptors and the time it was last observed.
struct ObjectLandmark {
  std::uint64_t id{0};
  Eigen::Vector3d centroid{Eigen::Vector3d::Zero()};
  double width{0.0};
  double height{0.0};
  double last_seen{0.0};  // seconds

  bool valid() const
  {
    return width > 0.0 && height > 0.0 && centroid.allFinite();
  }
};

struct ObjectMap {
  std::string robot_id;
  double stamp{0.0};  // seconds
  std::vector<ObjectLandmark> objects;

  std::size_t size() const { return objects.size(); }
  bool empty() const { return objects.empty(); }

  const ObjectLandmark* find(std::uint64_t id) const
  {
    for (const auto& o : objects) {
      if (o.id == id) return &o;
    }
    return nullptr;
  }
};

struct MapParams {
  double kappa{20.0};  // seconds; objects older than this leave the shared map
};

/// Age of an object at time `now`, clamped at zero so replayed or skewed
/// clocks cannot produce negative recency values.
inline double object_age(const ObjectLandmark& obj, double now)
{
  return std::max(0.0, now - obj.last_seen);
}

/// Inserts a new observation or refreshes an existing one (matched by id).
inline ObjectMap upsert(ObjectMap map, const ObjectLandmark& obs)
{
  if (!obs.valid()) {
    throw std::invalid_argument("upsert: invalid landmark (non-positive size or non-finite centroid)");
  }
  for (auto& o : map.objects) {
    if (o.id == obs.id) {
      o = obs;
      map.stamp = std::max(map.stamp, obs.last_seen);
      return map;
    }
  }
  map.objects.push_back(obs);
  map.stamp = std::max(map.stamp, obs.last_seen);
  return map;
}

/// Restricts a map to recently seen objects (age < kappa).
inline ObjectMap recent_view(const ObjectMap& map, double now, const MapParams& params)
{
  ObjectMap out;
  out.robot_id = map.robot_id;
  out.stamp = map.stamp;
  for (const auto& o : map.objects) {
    if (object_age(o, now) < params.kappa) out.objects.push_back(o);
  }
  return out;
}

namespace detail {

// 17 significant digits, enough to reproduce any double exactly.
inline std::string fmt_double(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double require_number(const nlohmann::json& j, const char* field)
{
  if (!j.contains(field)) {
    throw std::runtime_error(std::string("object map message: missing field \"") + field + "\"");
  }
  if (!j[field].is_number()) {
    throw std::runtime_error(std::string("object map message: field \"") + field + "\" is not a number");
  }
  return j[field].get<double>();
}

}  // namespace detail

/**
 * Serializes a map to the wire schema
 *   {"robot_id": str, "stamp": f64,
 *    "objects": [{"id": u64, "p": [x,y,z], "w": f64, "h": f64, "last_seen": f64}]}
 * Numbers are written with 17 significant digits so the message round-trips
 * bit-exactly.
 */
inline std::string serialize(const ObjectMap& map)
{
  using detail::fmt_double;
  std::string s = "{\"robot_id\":" + nlohmann::json(map.robot_id).dump();
  s += ",\"stamp\":" + fmt_double(map.stamp);
  s += ",\"objects\":[";
  for (std::size_t i = 0; i < map.objects.size(); ++i) {
    const auto& o = map.objects[i];
    if (i) s += ',';
    s += "{\"id\":" + std::to_string(o.id);
    s += ",\"p\":[" + fmt_double(o.centroid.x()) + ',' + fmt_double(o.centroid.y()) + ',' +
         fmt_double(o.centroid.z()) + ']';
    s += ",\"w\":" + fmt_double(o.width);
    s += ",\"h\":" + fmt_double(o.height);
    s += ",\"last_seen\":" + fmt_double(o.last_seen) + '}';
  }
  s += "]}";
  return s;
}

inline ObjectMap deserialize(const std::string& bytes)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("object map message: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("object map message: top level is not an object");
  if (!j.contains("robot_id") || !j["robot_id"].is_string()) {
    throw std::runtime_error("object map message: missing field \"robot_id\"");
  }
  ObjectMap map;
  map.robot_id = j["robot_id"].get<std::string>();
  map.stamp = detail::require_number(j, "stamp");
  if (!j.contains("objects") || !j["objects"].is_array()) {
    throw std::runtime_error("object map message: missing field \"objects\"");
  }
  for (const auto& jo : j["objects"]) {
    ObjectLandmark o;
    if (!jo.contains("id") || !jo["id"].is_number_unsigned()) {
      throw std::runtime_error("object map message: missing field \"id\"");
    }
    o.id = jo["id"].get<std::uint64_t>();
    if (!jo.contains("p") || !jo["p"].is_array() || jo["p"].size() != 3) {
      throw std::runtime_error("object map message: missing field \"p\" (3-vector)");
    }
    for (int k = 0; k < 3; ++k) {
      if (!jo["p"][k].is_number()) throw std::runtime_error("object map message: field \"p\" is not numeric");
      o.centroid[k] = jo["p"][k].get<double>();
    }
    o.width = detail::require_number(jo, "w");
    o.height = detail::require_number(jo, "h");
    o.last_seen = detail::require_number(jo, "last_seen");
    if (o.width <= 0.0 || o.height <= 0.0) {
      throw std::runtime_error("object map message: non-positive \"w\"/\"h\"");
    }
    if (map.find(o.id) != nullptr) {
      throw std::runtime_error("object map message: duplicate object id " + std::to_string(o.id));
    }
    map.objects.push_back(o);
  }
  return map;
}

}  // namespace tcaff

#endif  // TCAFF_OBJECT_MAP_HPP
