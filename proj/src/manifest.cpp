#include "disprobe/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "disprobe/pfm.hpp"
#include "disprobe/png_io.hpp"
#include "disprobe/ppm.hpp"

namespace disprobe {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string lower_ext(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  return ext;
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest " + path);

  DatasetManifest out;
  out.name = std::filesystem::path(path).stem().string();

  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;

    std::vector<std::string> fields;
    std::stringstream ss(s);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (fields.size() != 4)
      throw FormatError("manifest " + path + " line " + std::to_string(lineno) +
                        ": expected left,right,gt,format");

    ManifestEntry e;
    e.left_path = fields[0];
    e.right_path = fields[1];
    e.gt_path = fields[2];
    if (fields[3] == "pfm")
      e.gt_format = GtFormat::Pfm;
    else if (fields[3] == "kitti_png16")
      e.gt_format = GtFormat::KittiPng16;
    else
      throw FormatError("manifest " + path + " line " + std::to_string(lineno) +
                        ": unknown gt format '" + fields[3] + "'");
    out.entries.push_back(std::move(e));
  }
  if (out.entries.empty()) throw FormatError("manifest " + path + " is empty");
  return out;
}

ImageBuffer load_image(const std::string& path) {
  std::string ext = lower_ext(path);
  if (ext != ".pfm" && ext != ".png" && ext != ".ppm" && ext != ".pgm")
    throw FormatError("unsupported image extension '" + ext + "' for " + path);
  std::vector<uint8_t> bytes = read_file(path);
  if (ext == ".pfm") return parse_pfm(bytes).to_image();
  if (ext == ".png") return parse_png_image(bytes);
  return parse_ppm(bytes);
}

void save_image(const std::string& path, const ImageBuffer& img) {
  std::string ext = lower_ext(path);
  if (ext == ".pfm")
    write_file(path, write_pfm(PfmData::from_image(img)));
  else if (ext == ".png")
    write_file(path, write_png_image(img));
  else if (ext == ".ppm" || ext == ".pgm")
    write_file(path, write_ppm(img));
  else
    throw FormatError("unsupported image extension '" + ext + "' for " + path);
}

StereoSample load_sample(const DatasetManifest& manifest, size_t index) {
  if (index >= manifest.entries.size())
    throw RangeError("sample index " + std::to_string(index) +
                     " out of range for dataset " + manifest.name);
  const ManifestEntry& e = manifest.entries[index];

  StereoSample sample;
  sample.left = load_image(e.left_path);
  sample.right = load_image(e.right_path);
  if (e.gt_format == GtFormat::Pfm)
    sample.gt = parse_pfm(read_file(e.gt_path)).to_disparity();
  else
    sample.gt = parse_kitti_disparity(read_file(e.gt_path));
  sample.id = manifest.name + "/" + std::to_string(index);
  sample.check_consistent();
  return sample;
}

}  // namespace disprobe
