#include "descsyn/io/dataset.hpp"

#include <zlib.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "descsyn/io/binary.hpp"
#include "descsyn/io/colmap.hpp"

namespace descsyn {

namespace {

constexpr char kMagic[] = "DSYNDS";
constexpr int kVersion = 1;

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()),
            static_cast<uInt>(bytes.size())));
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

double manifest_double(const std::string& tok) {
  double v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw DatasetError(DatasetError::Kind::malformed,
                       "dataset header: bad real '" + tok + "'");
  }
  return v;
}

long long manifest_int(const std::string& tok) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw DatasetError(DatasetError::Kind::malformed,
                       "dataset header: bad integer '" + tok + "'");
  }
  return v;
}

std::uint64_t manifest_u64(const std::string& tok) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw DatasetError(DatasetError::Kind::malformed,
                       "dataset header: bad unsigned '" + tok + "'");
  }
  return v;
}

struct FrameTableEntry {
  std::string id;
  bool is_synthetic = false;
  bool has_gt = false;
  bool has_coords = false;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  std::size_t offset = 0;
  std::size_t size = 0;
  PinholeIntrinsics intr;
  SE3Pose pose;
};

std::string frame_block(const DatasetFrame& df) {
  const Frame& f = df.frame;
  std::string block;
  const Eigen::Index n = f.size();
  const Eigen::Index d = f.descriptors.rows();
  block.reserve(static_cast<std::size_t>(n * (16 + d * 4 + 8 + 24) + 4));
  for (Eigen::Index i = 0; i < n; ++i) {
    append_f64_le(block, f.keypoints(0, i));
    append_f64_le(block, f.keypoints(1, i));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index r = 0; r < d; ++r) {
      append_f32_le(block, f.descriptors(r, i));
    }
  }
  if (f.gt_landmark_ids.has_value()) {
    for (const std::uint64_t id : *f.gt_landmark_ids) {
      append_u64_le(block, id);
    }
  }
  if (df.coords.has_value()) {
    for (Eigen::Index i = 0; i < n; ++i) {
      append_f64_le(block, (*df.coords)(0, i));
      append_f64_le(block, (*df.coords)(1, i));
      append_f64_le(block, (*df.coords)(2, i));
    }
  }
  append_u32_le(block, crc32_of(block));
  return block;
}

}  // namespace

std::string serialize_dataset(const Dataset& ds) {
  if (ds.manifest.version != kVersion) {
    throw DatasetError(DatasetError::Kind::version,
                       "dataset: can only write format version 1");
  }

  // Payload first, so the frame table can carry offsets.
  std::string payload;
  std::vector<std::pair<std::size_t, std::size_t>> extents;
  for (const auto& df : ds.frames) {
    const Frame& f = df.frame;
    if (f.gt_landmark_ids.has_value() &&
        static_cast<Eigen::Index>(f.gt_landmark_ids->size()) != f.size()) {
      throw DatasetError(DatasetError::Kind::malformed,
                         "dataset: gt ids not parallel to keypoints");
    }
    if (df.coords.has_value() && df.coords->cols() != f.size()) {
      throw DatasetError(DatasetError::Kind::malformed,
                         "dataset: coords not parallel to keypoints");
    }
    if (f.frame_id.empty() ||
        f.frame_id.find_first_of(" \t\n") != std::string::npos) {
      throw DatasetError(DatasetError::Kind::malformed,
                         "dataset: frame id empty or contains whitespace");
    }
    const std::string block = frame_block(df);
    extents.emplace_back(payload.size(), block.size());
    payload += block;
  }

  std::string out;
  out += std::string(kMagic) + " " + std::to_string(kVersion) + "\n";
  if (ds.manifest.scene.has_value()) {
    const SceneParams& sp = *ds.manifest.scene;
    out += "scene " + std::to_string(sp.seed) + " " +
           std::to_string(sp.landmark_count) + " " +
           std::to_string(sp.descriptor_dim) + " " +
           format_real(sp.view_strength);
    for (int a = 0; a < 3; ++a) out += " " + format_real(sp.bounds.min[a]);
    for (int a = 0; a < 3; ++a) out += " " + format_real(sp.bounds.max[a]);
    out += "\n";
  }
  for (const auto& [key, value] : ds.manifest.config) {
    out += "config " + key + " " + value + "\n";
  }
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    const Frame& f = ds.frames[i].frame;
    out += "frame " + f.frame_id + " " +
           std::to_string(f.is_synthetic ? 1 : 0) + " " +
           std::to_string(f.gt_landmark_ids.has_value() ? 1 : 0) + " " +
           std::to_string(ds.frames[i].coords.has_value() ? 1 : 0) + " " +
           std::to_string(f.size()) + " " +
           std::to_string(f.descriptors.rows()) + " " +
           std::to_string(extents[i].first) + " " +
           std::to_string(extents[i].second) + " " + format_real(f.intrinsics.fx) +
           " " + format_real(f.intrinsics.fy) + " " +
           format_real(f.intrinsics.cx) + " " + format_real(f.intrinsics.cy) +
           " " + std::to_string(f.intrinsics.width) + " " +
           std::to_string(f.intrinsics.height);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        out += " " + format_real(f.pose.rotation(r, c));
      }
    }
    for (int a = 0; a < 3; ++a) {
      out += " " + format_real(f.pose.translation[a]);
    }
    out += "\n";
  }
  out += "end_header\n";
  out += payload;
  return out;
}

Dataset parse_dataset(const std::string& bytes) {
  Dataset ds;
  std::vector<FrameTableEntry> table;

  std::size_t pos = 0;
  bool saw_magic = false;
  bool saw_end = false;
  while (pos < bytes.size()) {
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) {
      throw DatasetError(DatasetError::Kind::truncated,
                         "dataset: header line without newline");
    }
    const std::string line = bytes.substr(pos, eol - pos);
    pos = eol + 1;

    if (!saw_magic) {
      const auto tokens = split_ws(line);
      if (tokens.size() != 2 || tokens[0] != kMagic) {
        throw DatasetError(DatasetError::Kind::malformed,
                           "dataset: missing DSYNDS magic");
      }
      const long long version = manifest_int(tokens[1]);
      if (version != kVersion) {
        throw DatasetError(DatasetError::Kind::version,
                           "dataset: unsupported format version " +
                               tokens[1]);
      }
      ds.manifest.version = kVersion;
      saw_magic = true;
      continue;
    }
    if (line == "end_header") {
      saw_end = true;
      break;
    }
    const auto tokens = split_ws(line);
    if (tokens.empty()) {
      throw DatasetError(DatasetError::Kind::malformed,
                         "dataset: empty header line");
    }
    if (tokens[0] == "scene") {
      if (tokens.size() != 11) {
        throw DatasetError(DatasetError::Kind::malformed,
                           "dataset: scene line must have 10 fields");
      }
      SceneParams sp;
      sp.seed = manifest_u64(tokens[1]);
      sp.landmark_count = static_cast<int>(manifest_int(tokens[2]));
      sp.descriptor_dim = static_cast<int>(manifest_int(tokens[3]));
      sp.view_strength = manifest_double(tokens[4]);
      for (int a = 0; a < 3; ++a) sp.bounds.min[a] = manifest_double(tokens[5 + a]);
      for (int a = 0; a < 3; ++a) sp.bounds.max[a] = manifest_double(tokens[8 + a]);
      ds.manifest.scene = sp;
    } else if (tokens[0] == "config") {
      if (tokens.size() < 3) {
        throw DatasetError(DatasetError::Kind::malformed,
                           "dataset: config line needs key and value");
      }
      const std::string key = tokens[1];
      const std::size_t key_pos = line.find(key, 7);
      const std::size_t value_pos =
          line.find_first_not_of(" \t", key_pos + key.size());
      ds.manifest.config.emplace_back(
          key, value_pos == std::string::npos ? "" : line.substr(value_pos));
    } else if (tokens[0] == "frame") {
      if (tokens.size() != 27) {
        throw DatasetError(DatasetError::Kind::malformed,
                           "dataset: frame line must have 26 fields");
      }
      FrameTableEntry e;
      e.id = tokens[1];
      e.is_synthetic = manifest_int(tokens[2]) != 0;
      e.has_gt = manifest_int(tokens[3]) != 0;
      e.has_coords = manifest_int(tokens[4]) != 0;
      e.n = static_cast<Eigen::Index>(manifest_int(tokens[5]));
      e.d = static_cast<Eigen::Index>(manifest_int(tokens[6]));
      e.offset = static_cast<std::size_t>(manifest_int(tokens[7]));
      e.size = static_cast<std::size_t>(manifest_int(tokens[8]));
      e.intr.fx = manifest_double(tokens[9]);
      e.intr.fy = manifest_double(tokens[10]);
      e.intr.cx = manifest_double(tokens[11]);
      e.intr.cy = manifest_double(tokens[12]);
      e.intr.width = static_cast<int>(manifest_int(tokens[13]));
      e.intr.height = static_cast<int>(manifest_int(tokens[14]));
      int t = 15;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          e.pose.rotation(r, c) = manifest_double(tokens[t++]);
        }
      }
      for (int a = 0; a < 3; ++a) {
        e.pose.translation[a] = manifest_double(tokens[t++]);
      }
      if (e.n < 0 || e.d < 0) {
        throw DatasetError(DatasetError::Kind::malformed,
                           "dataset: negative frame dimensions");
      }
      table.push_back(std::move(e));
    } else {
      throw DatasetError(DatasetError::Kind::malformed,
                         "dataset: unknown header line '" + tokens[0] + "'");
    }
  }
  if (!saw_magic) {
    throw DatasetError(DatasetError::Kind::malformed,
                       "dataset: missing DSYNDS magic");
  }
  if (!saw_end) {
    throw DatasetError(DatasetError::Kind::truncated,
                       "dataset: header not terminated by end_header");
  }

  const std::string_view payload =
      std::string_view(bytes).substr(pos);
  for (const auto& e : table) {
    const std::size_t expected =
        static_cast<std::size_t>(e.n) * 16 +
        static_cast<std::size_t>(e.n * e.d) * 4 +
        (e.has_gt ? static_cast<std::size_t>(e.n) * 8 : 0) +
        (e.has_coords ? static_cast<std::size_t>(e.n) * 24 : 0) + 4;
    if (e.size != expected) {
      throw DatasetError(DatasetError::Kind::malformed,
                         "dataset: frame '" + e.id +
                             "' block size disagrees with its dimensions");
    }
    if (e.offset + e.size < e.offset ||
        e.offset + e.size > payload.size()) {
      throw DatasetError(DatasetError::Kind::truncated,
                         "dataset: frame '" + e.id +
                             "' extends past end of file");
    }
    const std::string_view block = payload.substr(e.offset, e.size);
    const std::string_view body = block.substr(0, block.size() - 4);
    ByteReader crc_reader(block.substr(block.size() - 4));
    if (crc_reader.read_u32_le() != crc32_of(body)) {
      throw DatasetError(DatasetError::Kind::checksum,
                         "dataset: frame '" + e.id + "' failed its checksum");
    }

    ByteReader reader(body);
    DatasetFrame df;
    Frame& f = df.frame;
    f.frame_id = e.id;
    f.is_synthetic = e.is_synthetic;
    f.pose = e.pose;
    f.intrinsics = e.intr;
    f.keypoints.resize(2, e.n);
    for (Eigen::Index i = 0; i < e.n; ++i) {
      f.keypoints(0, i) = reader.read_f64_le();
      f.keypoints(1, i) = reader.read_f64_le();
    }
    f.descriptors.resize(e.d, e.n);
    for (Eigen::Index i = 0; i < e.n; ++i) {
      for (Eigen::Index r = 0; r < e.d; ++r) {
        f.descriptors(r, i) = reader.read_f32_le();
      }
    }
    if (e.has_gt) {
      f.gt_landmark_ids = std::vector<std::uint64_t>();
      f.gt_landmark_ids->reserve(static_cast<std::size_t>(e.n));
      for (Eigen::Index i = 0; i < e.n; ++i) {
        f.gt_landmark_ids->push_back(reader.read_u64_le());
      }
    }
    if (e.has_coords) {
      df.coords = Eigen::Matrix3Xd(3, e.n);
      for (Eigen::Index i = 0; i < e.n; ++i) {
        (*df.coords)(0, i) = reader.read_f64_le();
        (*df.coords)(1, i) = reader.read_f64_le();
        (*df.coords)(2, i) = reader.read_f64_le();
      }
    }
    ds.frames.push_back(std::move(df));
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  write_file(path, serialize_dataset(ds));
}

Dataset read_dataset(const std::string& path) {
  return parse_dataset(read_file(path));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) {
    throw std::runtime_error("read failed for " + path);
  }
  return std::move(ss).str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace descsyn
