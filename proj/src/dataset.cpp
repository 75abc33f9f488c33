#include "uoiskit/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "uoiskit/error.hpp"

namespace uoiskit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string scene_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05zu.ppm", index);
  return buf;
}

ImageSize size_from_json(const json& j) {
  return ImageSize{j.at("h").get<int>(), j.at("w").get<int>()};
}

fs::path manifest_path(const fs::path& path) {
  return fs::is_directory(path) ? path / "manifest.json" : path;
}

}  // namespace

json mask_to_json(const BinaryMask& mask) {
  return json{{"h", mask.size().h}, {"w", mask.size().w}, {"runs", mask.runs()}};
}

BinaryMask mask_from_json(const json& record) {
  ImageSize size;
  std::vector<std::int64_t> raw;
  try {
    size = size_from_json(record);
    raw = record.at("runs").get<std::vector<std::int64_t>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::DatasetError, std::string("malformed mask record: ") + e.what());
  }
  std::vector<std::uint32_t> runs;
  runs.reserve(raw.size());
  for (std::int64_t r : raw) {
    if (r < 0 || r > 0xFFFFFFFFLL) fail(ErrorKind::CorruptMask, "run length out of range: " + std::to_string(r));
    runs.push_back(static_cast<std::uint32_t>(r));
  }
  return BinaryMask::from_runs(size, std::move(runs));
}

json to_json(const SceneConfig& c) {
  return json{{"h", c.size.h},
              {"w", c.size.w},
              {"min_objects", c.min_objects},
              {"max_objects", c.max_objects},
              {"shapes", {{"ellipse", c.shapes.ellipse}, {"rectangle", c.shapes.rectangle}, {"polygon", c.shapes.polygon}}},
              {"min_radius_frac", c.min_radius_frac},
              {"max_radius_frac", c.max_radius_frac},
              {"texture_amplitude", c.texture_amplitude},
              {"texture_probability", c.texture_probability},
              {"occlusion_probability", c.occlusion_probability},
              {"clutter_amplitude", c.clutter_amplitude},
              {"min_visible_pixels", c.min_visible_pixels}};
}

SceneConfig scene_config_from_json(const json& j) {
  SceneConfig c;
  c.size = {j.value("h", c.size.h), j.value("w", c.size.w)};
  c.min_objects = j.value("min_objects", c.min_objects);
  c.max_objects = j.value("max_objects", c.max_objects);
  if (j.contains("shapes")) {
    const json& s = j.at("shapes");
    c.shapes.ellipse = s.value("ellipse", true);
    c.shapes.rectangle = s.value("rectangle", true);
    c.shapes.polygon = s.value("polygon", true);
  }
  c.min_radius_frac = j.value("min_radius_frac", c.min_radius_frac);
  c.max_radius_frac = j.value("max_radius_frac", c.max_radius_frac);
  c.texture_amplitude = j.value("texture_amplitude", c.texture_amplitude);
  c.texture_probability = j.value("texture_probability", c.texture_probability);
  c.occlusion_probability = j.value("occlusion_probability", c.occlusion_probability);
  c.clutter_amplitude = j.value("clutter_amplitude", c.clutter_amplitude);
  c.min_visible_pixels = j.value("min_visible_pixels", c.min_visible_pixels);
  return c;
}

void write_ppm(const RgbImage& image, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::DatasetError, "cannot write " + path.string());
  out << "P6\n" << image.size.w << " " << image.size.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()), static_cast<std::streamsize>(image.data.size()));
  if (!out) fail(ErrorKind::DatasetError, "short write to " + path.string());
}

RgbImage read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::DatasetError, "cannot open image " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w < 1 || h < 1) {
    fail(ErrorKind::DatasetError, "unsupported PPM header in " + path.string());
  }
  in.get();  // single whitespace before the raster
  RgbImage image(ImageSize{h, w});
  in.read(reinterpret_cast<char*>(image.data.data()), static_cast<std::streamsize>(image.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.data.size())) {
    fail(ErrorKind::DatasetError, "truncated PPM raster in " + path.string());
  }
  return image;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::DatasetError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::DatasetError, "invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const json& j, const fs::path& path, int indent) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::DatasetError, "cannot write " + path.string());
  out << j.dump(indent) << "\n";
  if (!out) fail(ErrorKind::DatasetError, "short write to " + path.string());
}

json write_dataset(const Dataset& dataset, const fs::path& dir) {
  if (!dataset.seeds.empty() && dataset.seeds.size() != dataset.scenes.size()) {
    fail(ErrorKind::DatasetError, "seed list length does not match scene count");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::DatasetError, "cannot create " + dir.string() + ": " + ec.message());

  json scenes = json::array();
  for (std::size_t i = 0; i < dataset.scenes.size(); ++i) {
    const Scene& scene = dataset.scenes[i];
    const std::string image_name = scene_file_name(i);
    write_ppm(scene.image, dir / image_name);
    json instances = json::array();
    for (const BinaryMask& m : scene.instances) instances.push_back(mask_to_json(m));
    json record{{"index", i},
                {"image", image_name},
                {"size", {{"h", scene.size().h}, {"w", scene.size().w}}},
                {"instances", std::move(instances)}};
    if (!dataset.seeds.empty()) record["seed"] = dataset.seeds[i];
    scenes.push_back(std::move(record));
  }
  json manifest{{"format", kDatasetFormat},
                {"version", kManifestVersion},
                {"global_seed", dataset.global_seed},
                {"config", dataset.config},
                {"scenes", std::move(scenes)}};
  write_json_file(manifest, dir / "manifest.json");
  return manifest;
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path mpath = manifest_path(dir);
  const fs::path root = mpath.parent_path();
  const json manifest = read_json_file(mpath);
  Dataset out;
  try {
    if (manifest.at("format").get<std::string>() != kDatasetFormat) {
      fail(ErrorKind::DatasetError, mpath.string() + " is not a dataset manifest");
    }
    out.config = manifest.value("config", json::object());
    out.global_seed = manifest.value("global_seed", std::uint64_t{0});
    const json& scenes = manifest.at("scenes");
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const json& rec = scenes[i];
      if (rec.at("index").get<std::size_t>() != i) {
        fail(ErrorKind::DatasetError, "scene " + std::to_string(i) + " missing or out of order in " + mpath.string());
      }
      RgbImage image = read_ppm(root / rec.at("image").get<std::string>());
      const ImageSize size = size_from_json(rec.at("size"));
      if (image.size != size) fail(ErrorKind::DatasetError, "scene " + std::to_string(i) + " image size mismatch");
      std::vector<BinaryMask> instances;
      for (const json& m : rec.at("instances")) {
        instances.push_back(mask_from_json(m));
        if (instances.back().size() != size) {
          fail(ErrorKind::DatasetError, "scene " + std::to_string(i) + " mask size mismatch");
        }
      }
      if (rec.contains("seed")) out.seeds.push_back(rec.at("seed").get<std::uint64_t>());
      out.scenes.push_back(make_scene(std::move(image), std::move(instances)));
    }
    if (!out.seeds.empty() && out.seeds.size() != out.scenes.size()) {
      fail(ErrorKind::DatasetError, "seed present on some scenes only");
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::DatasetError, "malformed manifest " + mpath.string() + ": " + e.what());
  }
  return out;
}

std::vector<InstanceSet> read_instance_sets(const fs::path& path) {
  const fs::path mpath = manifest_path(path);
  const json manifest = read_json_file(mpath);
  std::vector<InstanceSet> out;
  try {
    const json& scenes = manifest.at("scenes");
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const json& rec = scenes[i];
      if (rec.at("index").get<std::size_t>() != i) {
        fail(ErrorKind::DatasetError, "scene " + std::to_string(i) + " missing or out of order in " + mpath.string());
      }
      InstanceSet set;
      set.size = size_from_json(rec.at("size"));
      for (const json& m : rec.at("instances")) {
        set.masks.push_back(mask_from_json(m));
        if (set.masks.back().size() != set.size) {
          fail(ErrorKind::DatasetError, "scene " + std::to_string(i) + " mask size mismatch");
        }
      }
      out.push_back(std::move(set));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::DatasetError, "malformed manifest " + mpath.string() + ": " + e.what());
  }
  return out;
}

}  // namespace uoiskit
