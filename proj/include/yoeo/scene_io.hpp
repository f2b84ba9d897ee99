#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "yoeo/synthetic.hpp"

namespace yoeo {

using Json = nlohmann::json;

inline constexpr int kSceneFormatVersion = 1;

Json sim3_to_json(const Sim3Transform& t);
Sim3Transform sim3_from_json(const Json& j);
Json axis_to_json(const JointAxis& axis);
JointAxis axis_from_json(const Json& j);
Json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const Json& j);

Json scene_to_json(const Scene& scene);
/// Throws Error(FormatMismatch) on schema violations, naming the field.
Scene scene_from_json(const Json& j);

/// JSON with a trailing newline; indent < 0 writes it compact. Throws Error(Io).
void write_json_file(const std::filesystem::path& path, const Json& j, int indent = 2);
/// Throws Error(Io) when unreadable, Error(InvalidArgument) with the parser
/// position when the text is not JSON.
Json read_json_file(const std::filesystem::path& path);

void save_scene(const std::filesystem::path& path, const Scene& scene);
Scene load_scene(const std::filesystem::path& path);

/// ASCII PLY with x y z, semantic label and instance id per vertex.
void write_ply(const std::filesystem::path& path, const Scene& scene);

}  // namespace yoeo
