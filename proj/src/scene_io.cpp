#include "yoeo/scene_io.hpp"

#include <fstream>
#include <sstream>

#include "yoeo/error.hpp"

namespace yoeo {

namespace {

[[noreturn]] void schema_error(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::FormatMismatch, "field '" + field + "': " + what);
}

const Json& field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) schema_error(name, "missing");
  return j.at(name);
}

}  // namespace

Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) schema_error("vec3", "expected 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Json sim3_to_json(const Sim3Transform& t) {
  Json r = Json::array();
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) r.push_back(t.rotation.matrix()(i, k));
  }
  return Json{{"s", t.scale}, {"R", r}, {"t", vec3_to_json(t.translation)}};
}

Sim3Transform sim3_from_json(const Json& j) {
  const Json& r = field(j, "R");
  if (!r.is_array() || r.size() != 9) schema_error("R", "expected 9 numbers (row-major)");
  Mat3 m;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) m(i, k) = r[3 * i + k].get<double>();
  }
  try {
    return Sim3Transform(field(j, "s").get<double>(), Rotation3::from_matrix(m),
                         vec3_from_json(field(j, "t")));
  } catch (const Error& e) {
    schema_error("pose", e.what());
  }
}

Json axis_to_json(const JointAxis& axis) {
  return Json{{"origin", vec3_to_json(axis.origin)},
              {"dir", vec3_to_json(axis.direction)},
              {"kind", axis.kind == JointKind::Revolute ? "revolute" : "prismatic"}};
}

JointAxis axis_from_json(const Json& j) {
  JointAxis axis;
  axis.origin = vec3_from_json(field(j, "origin"));
  axis.direction = vec3_from_json(field(j, "dir"));
  const std::string kind = field(j, "kind").get<std::string>();
  if (kind == "revolute") {
    axis.kind = JointKind::Revolute;
  } else if (kind == "prismatic") {
    axis.kind = JointKind::Prismatic;
  } else {
    schema_error("kind", "expected 'revolute' or 'prismatic'");
  }
  return axis;
}

Json scene_to_json(const Scene& scene) {
  Json points = Json::array();
  Json npcs = Json::array();
  for (std::size_t i = 0; i < scene.size(); ++i) {
    points.push_back(vec3_to_json(scene.points[i]));
    npcs.push_back(scene.gt_npcs[i] ? vec3_to_json(*scene.gt_npcs[i]) : Json(nullptr));
  }
  Json instances = Json::array();
  for (const auto& inst : scene.instances) {
    instances.push_back(Json{{"class", inst.semantic_class},
                             {"pose", sim3_to_json(inst.pose)},
                             {"size", vec3_to_json(inst.size)},
                             {"axis", axis_to_json(inst.axis)}});
  }
  return Json{{"version", kSceneFormatVersion},
              {"points", std::move(points)},
              {"gt_semantic", scene.gt_semantic},
              {"gt_instance", scene.gt_instance},
              {"gt_npcs", std::move(npcs)},
              {"instances", std::move(instances)},
              {"camera_pose", sim3_to_json(scene.camera_pose)}};
}

Scene scene_from_json(const Json& j) {
  try {
    if (field(j, "version").get<int>() != kSceneFormatVersion) {
      schema_error("version", "unsupported scene version");
    }
    Scene scene;
    for (const auto& p : field(j, "points")) scene.points.push_back(vec3_from_json(p));
    scene.gt_semantic = field(j, "gt_semantic").get<std::vector<int>>();
    scene.gt_instance = field(j, "gt_instance").get<std::vector<int>>();
    for (const auto& c : field(j, "gt_npcs")) {
      scene.gt_npcs.push_back(c.is_null() ? std::nullopt : std::optional<Vec3>(vec3_from_json(c)));
    }
    for (const auto& inst : field(j, "instances")) {
      InstanceRecord rec;
      rec.semantic_class = field(inst, "class").get<int>();
      rec.pose = sim3_from_json(field(inst, "pose"));
      rec.size = vec3_from_json(field(inst, "size"));
      rec.axis = axis_from_json(field(inst, "axis"));
      scene.instances.push_back(rec);
    }
    scene.camera_pose = sim3_from_json(field(j, "camera_pose"));
    try {
      scene.validate();
    } catch (const Error& e) {
      schema_error("scene", e.what());
    }
    return scene;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::FormatMismatch, std::string("scene JSON: ") + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j, int indent) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << j.dump(indent) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

void save_scene(const std::filesystem::path& path, const Scene& scene) {
  write_json_file(path, scene_to_json(scene), -1);
}

Scene load_scene(const std::filesystem::path& path) {
  try {
    return scene_from_json(read_json_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_ply(const std::filesystem::path& path, const Scene& scene) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << scene.size() << '\n'
      << "property double x\nproperty double y\nproperty double z\n"
      << "property int label\nproperty int instance\nend_header\n";
  out.precision(17);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Vec3& p = scene.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << scene.gt_semantic[i] << ' '
        << scene.gt_instance[i] << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace yoeo
