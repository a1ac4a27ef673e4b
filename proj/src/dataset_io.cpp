#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "cegzsl/binary_io.hpp"
#include "cegzsl/dataset.hpp"

namespace cegzsl {

namespace fs = std::filesystem;

namespace {

constexpr char kGzbMagic[] = "GZB1";
constexpr std::uint32_t kGzbVersion = 1;

void put_labels(binary::Writer& w, const std::vector<ClassId>& y) {
  for (ClassId v : y) w.u32(v);
}

std::vector<ClassId> get_labels(binary::Reader& r, std::size_t n) {
  r.need(n * 4);
  std::vector<ClassId> y(n);
  for (auto& v : y) v = r.u32();
  return y;
}

// --- csv-bundle -----------------------------------------------------------

void write_csv(const fs::path& path, const Mat& x, std::span<const ClassId> ids) {
  std::string text;
  char buf[32];
  for (std::size_t i = 0; i < x.rows(); ++i) {
    text += std::to_string(ids[i]);
    for (float v : x.row(i)) {
      // 9 significant digits round-trip any float exactly.
      std::snprintf(buf, sizeof(buf), ",%.9g", static_cast<double>(v));
      text += buf;
    }
    text += '\n';
  }
  binary::write_text_atomic(path.string(), text);
}

void read_csv(const fs::path& path, std::size_t width, Mat& x, std::vector<ClassId>& ids) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<float> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t fields = 0;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      const std::string cell = line.substr(start, end - start);
      if (fields == 0) {
        unsigned long id = 0;
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), id);
        if (ec != std::errc() || p != cell.data() + cell.size()) {
          throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad class id '" + cell + "'");
        }
        ids.push_back(static_cast<ClassId>(id));
      } else {
        try {
          std::size_t used = 0;
          values.push_back(std::stof(cell, &used));
          if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
          throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad value '" + cell + "'");
        }
      }
      ++fields;
      start = end + 1;
    }
    if (fields != width + 1) {
      throw ShapeError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(width) + " values, found " + std::to_string(fields - 1));
    }
  }
  x = Mat(ids.size(), width, std::move(values));
}

FeatureDataset load_csv_bundle(const fs::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw IoError("csv-bundle is missing meta.json in " + dir.string());
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("meta.json: " + std::string(e.what()));
  }
  FeatureDataset ds;
  std::size_t d_x = 0, d_a = 0;
  try {
    ds.semantic.seen_count = meta.at("S").get<std::size_t>();
    ds.semantic.unseen_count = meta.at("U").get<std::size_t>();
    d_x = meta.at("d_x").get<std::size_t>();
    d_a = meta.at("d_a").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("meta.json: " + std::string(e.what()));
  }
  std::vector<ClassId> desc_ids;
  read_csv(dir / "descriptors.csv", d_a, ds.semantic.descriptors, desc_ids);
  for (std::size_t i = 0; i < desc_ids.size(); ++i) {
    if (desc_ids[i] != i + 1) throw ShapeError("descriptors.csv rows must be ordered by class id 1..S+U");
  }
  read_csv(dir / "train.csv", d_x, ds.train_x, ds.train_y);
  read_csv(dir / "test_seen.csv", d_x, ds.test_seen_x, ds.test_seen_y);
  read_csv(dir / "test_unseen.csv", d_x, ds.test_unseen_x, ds.test_unseen_y);
  return ds;
}

void save_csv_bundle(const FeatureDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json meta = {{"S", ds.seen_count()},
                         {"U", ds.unseen_count()},
                         {"d_x", ds.feature_dim()},
                         {"d_a", ds.semantic.dim()}};
  binary::write_text_atomic((dir / "meta.json").string(), meta.dump(2) + "\n");
  write_csv(dir / "descriptors.csv", ds.semantic.descriptors, all_ids(ds.semantic));
  write_csv(dir / "train.csv", ds.train_x, ds.train_y);
  write_csv(dir / "test_seen.csv", ds.test_seen_x, ds.test_seen_y);
  write_csv(dir / "test_unseen.csv", ds.test_unseen_x, ds.test_unseen_y);
}

}  // namespace

std::vector<std::uint8_t> encode_gzb(const FeatureDataset& ds) {
  binary::Writer w;
  w.magic(kGzbMagic);
  for (std::size_t v : {std::size_t{kGzbVersion}, ds.seen_count(), ds.unseen_count(),
                        ds.feature_dim(), ds.semantic.dim(), ds.train_x.rows(),
                        ds.test_seen_x.rows(), ds.test_unseen_x.rows()}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.floats(ds.semantic.descriptors.values());
  w.floats(ds.train_x.values());
  put_labels(w, ds.train_y);
  w.floats(ds.test_seen_x.values());
  put_labels(w, ds.test_seen_y);
  w.floats(ds.test_unseen_x.values());
  put_labels(w, ds.test_unseen_y);
  return w.take();
}

FeatureDataset decode_gzb(std::span<const std::uint8_t> bytes) {
  binary::Reader r(bytes);
  if (bytes.size() < 4 || r.magic(4) != kGzbMagic) throw MagicMismatch("not a GZB1 file");
  const auto version = r.u32();
  if (version != kGzbVersion) throw MagicMismatch("unsupported gzb version " + std::to_string(version));
  FeatureDataset ds;
  ds.semantic.seen_count = r.u32();
  ds.semantic.unseen_count = r.u32();
  const std::size_t d_x = r.u32();
  const std::size_t d_a = r.u32();
  const std::size_t n_train = r.u32();
  const std::size_t n_ts = r.u32();
  const std::size_t n_tu = r.u32();
  ds.semantic.descriptors = r.floats(ds.semantic.class_count(), d_a);
  ds.train_x = r.floats(n_train, d_x);
  ds.train_y = get_labels(r, n_train);
  ds.test_seen_x = r.floats(n_ts, d_x);
  ds.test_seen_y = get_labels(r, n_ts);
  ds.test_unseen_x = r.floats(n_tu, d_x);
  ds.test_unseen_y = get_labels(r, n_tu);
  if (r.remaining() != 0) throw ShapeError("trailing bytes after gzb payload");
  ds.validate();
  return ds;
}

DatasetFormat detect_format(const std::string& path) {
  return fs::is_directory(path) ? DatasetFormat::csv_bundle : DatasetFormat::gzb;
}

FeatureDataset load_dataset(const std::string& path, DatasetFormat format) {
  FeatureDataset ds = format == DatasetFormat::gzb ? decode_gzb(binary::read_file(path))
                                                   : load_csv_bundle(path);
  ds.validate();
  return ds;
}

FeatureDataset load_dataset(const std::string& path) {
  return load_dataset(path, detect_format(path));
}

void save_dataset(const FeatureDataset& ds, const std::string& path, DatasetFormat format) {
  ds.validate();
  if (format == DatasetFormat::gzb) {
    binary::write_file_atomic(path, encode_gzb(ds));
  } else {
    save_csv_bundle(ds, path);
  }
}

}  // namespace cegzsl
