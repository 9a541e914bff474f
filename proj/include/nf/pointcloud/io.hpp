#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nf/pointcloud/point_cloud.hpp"

namespace nf::pointcloud {

enum class CloudFormat { xyz, ply };

// Picks the format from the file extension (.xyz/.txt/.pts -> xyz, .ply -> ply).
CloudFormat format_from_path(const std::filesystem::path& path);

// Reads an .xyz ("x y z" or "x y z nx ny nz" per row) or .ply cloud. For
// 3-column .xyz files a sibling "<stem>.normals" file, when present, is
// read as ground-truth normals. Normals within 1e-6 of unit length are kept
// verbatim, others are renormalized; zero normals are a parse error.
PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);

// One "nx ny nz" row per point.
std::vector<Vec3> load_normals(const std::filesystem::path& path);

// Writes positions as "x y z". When the cloud has normals they go to the
// "<stem>.normals" sidecar next to `path`.
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path);
void save_normals(const std::vector<Vec3>& normals, const std::filesystem::path& path);

struct Rgb {
  unsigned char r = 0, g = 0, b = 0;
};

struct PlyWriteOptions {
  bool binary = false;
  std::vector<std::string> comments;
  const std::vector<Vec3>* normals = nullptr;
  const std::vector<Rgb>* colors = nullptr;
};

void save_ply(const std::vector<Vec3>& points, const std::filesystem::path& path,
              const PlyWriteOptions& options = {});

// Comment lines of a PLY header, without the leading "comment ".
std::vector<std::string> read_ply_comments(const std::filesystem::path& path);

// Vertex colors of a PLY file (empty if it has none).
std::vector<Rgb> read_ply_colors(const std::filesystem::path& path);

}  // namespace nf::pointcloud
