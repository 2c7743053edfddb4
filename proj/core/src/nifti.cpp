#include "voxelpaint/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "byte_io.hpp"
#include "voxelpaint/error.hpp"

namespace voxelpaint {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDefaultVoxOffset = 352;

// Byte offsets of the NIfTI-1 header fields this reader touches.
namespace field {
constexpr std::size_t kSizeofHdr = 0;
constexpr std::size_t kDim = 40;
constexpr std::size_t kDatatype = 70;
constexpr std::size_t kBitpix = 72;
constexpr std::size_t kPixdim = 76;
constexpr std::size_t kVoxOffset = 108;
constexpr std::size_t kSclSlope = 112;
constexpr std::size_t kSclInter = 116;
constexpr std::size_t kCalMax = 124;
constexpr std::size_t kCalMin = 128;
constexpr std::size_t kMagic = 344;
}  // namespace field

enum DataType : std::int16_t { kUint8 = 2, kInt16 = 4, kFloat32 = 16 };

template <typename U>
U load(const unsigned char* header, std::size_t offset) {
  return detail::ByteReader(header + offset, sizeof(U), "nifti header").get<U>();
}

template <typename U>
void store(unsigned char* header, std::size_t offset, U value) {
  detail::ByteWriter w;
  w.put(value);
  std::memcpy(header + offset, w.bytes().data(), sizeof(U));
}

bool ends_with_gz(const std::filesystem::path& path) {
  const std::string s = path.string();
  return s.size() >= 3 && s.compare(s.size() - 3, 3, ".gz") == 0;
}

std::vector<unsigned char> read_maybe_gzip(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kMissingInput, "no such file: " + path.string());
  // gzread passes uncompressed files through unchanged.
  gzFile file = gzopen(path.string().c_str(), "rb");
  if (file == nullptr) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<unsigned char> bytes;
  unsigned char chunk[1 << 16];
  int got = 0;
  while ((got = gzread(file, chunk, sizeof(chunk))) > 0) bytes.insert(bytes.end(), chunk, chunk + got);
  const bool failed = got < 0;
  gzclose(file);
  if (failed) fail(ErrorCode::kTruncated, "corrupt compressed stream in " + path.string());
  return bytes;
}

void write_maybe_gzip(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  if (!ends_with_gz(path)) {
    detail::write_file(path, bytes);
    return;
  }
  gzFile file = gzopen(path.string().c_str(), "wb6");
  if (file == nullptr) fail(ErrorCode::kIo, "cannot write " + path.string());
  const int written = gzwrite(file, bytes.data(), static_cast<unsigned>(bytes.size()));
  const int closed = gzclose(file);
  if (written != static_cast<int>(bytes.size()) || closed != Z_OK) {
    fail(ErrorCode::kIo, "write failed for " + path.string());
  }
}

Volume parse_nifti(const std::vector<unsigned char>& bytes, const std::string& name) {
  require(bytes.size() >= kHeaderSize, ErrorCode::kTruncated,
          name + ": file shorter than a NIfTI-1 header");
  const unsigned char* h = bytes.data();
  const auto sizeof_hdr = load<std::int32_t>(h, field::kSizeofHdr);
  if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
    fail(ErrorCode::kBadHeaderSize,
         name + ": sizeof_hdr is " + std::to_string(sizeof_hdr) + ", expected 348 (little-endian)");
  }
  if (std::memcmp(h + field::kMagic, "n+1\0", 4) != 0) {
    fail(ErrorCode::kBadMagic, name + ": magic is not \"n+1\"");
  }

  std::int16_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = load<std::int16_t>(h, field::kDim + 2 * i);
  if (dim[0] < 3 || dim[0] > 7) {
    fail(ErrorCode::kDimMismatch, name + ": dim[0]=" + std::to_string(dim[0]) + " is not a 3D image");
  }
  for (int i = 1; i <= 3; ++i) {
    require(dim[i] > 0, ErrorCode::kDimMismatch,
            name + ": dim[" + std::to_string(i) + "]=" + std::to_string(dim[i]) + " must be positive");
  }
  for (int i = 4; i <= dim[0]; ++i) {
    require(dim[i] == 1, ErrorCode::kDimMismatch, name + ": only single-frame images are supported");
  }

  const auto datatype = load<std::int16_t>(h, field::kDatatype);
  const auto bitpix = load<std::int16_t>(h, field::kBitpix);
  std::size_t bytes_per_voxel = 0;
  switch (datatype) {
    case kUint8: bytes_per_voxel = 1; break;
    case kInt16: bytes_per_voxel = 2; break;
    case kFloat32: bytes_per_voxel = 4; break;
    default:
      fail(ErrorCode::kUnsupportedDatatype,
           name + ": datatype " + std::to_string(datatype) + " not supported (uint8, int16, float32)");
  }
  require(bitpix == static_cast<std::int16_t>(8 * bytes_per_voxel), ErrorCode::kUnsupportedDatatype,
          name + ": bitpix " + std::to_string(bitpix) + " inconsistent with datatype");

  const auto vox_offset_f = load<float>(h, field::kVoxOffset);
  require(vox_offset_f >= static_cast<float>(kHeaderSize), ErrorCode::kMalformed,
          name + ": vox_offset " + std::to_string(vox_offset_f) + " lies inside the header");
  const auto vox_offset = static_cast<std::size_t>(vox_offset_f);

  Volume volume(Dims{static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]),
                     static_cast<std::size_t>(dim[3])});
  const std::size_t need = volume.dims.count() * bytes_per_voxel;
  require(bytes.size() >= vox_offset && bytes.size() - vox_offset >= need, ErrorCode::kTruncated,
          name + ": voxel data truncated (" + std::to_string(bytes.size()) + " bytes, need " +
              std::to_string(vox_offset + need) + ")");

  detail::ByteReader data(bytes.data() + vox_offset, need, name);
  for (auto& v : volume.voxels) {
    switch (datatype) {
      case kUint8: v = static_cast<float>(data.get<std::uint8_t>()); break;
      case kInt16: v = static_cast<float>(data.get<std::int16_t>()); break;
      default: v = data.get<float>(); break;
    }
  }

  const auto slope = load<float>(h, field::kSclSlope);
  const auto inter = load<float>(h, field::kSclInter);
  if (slope != 0.0f && std::isfinite(slope) && !(slope == 1.0f && inter == 0.0f)) {
    const float offset = std::isfinite(inter) ? inter : 0.0f;
    for (auto& v : volume.voxels) v = slope * v + offset;
  }

  NiftiHeaderBytes header{};
  std::memcpy(header.data(), h, kHeaderSize);
  volume.header = header;
  return volume;
}

NiftiHeaderBytes fresh_header() {
  NiftiHeaderBytes h{};
  store<std::int32_t>(h.data(), field::kSizeofHdr, static_cast<std::int32_t>(kHeaderSize));
  for (int i = 0; i < 8; ++i) store<float>(h.data(), field::kPixdim + 4 * i, 1.0f);
  std::memcpy(h.data() + field::kMagic, "n+1\0", 4);
  return h;
}

}  // namespace

Volume read_nifti(const std::filesystem::path& path) {
  return parse_nifti(read_maybe_gzip(path), path.string());
}

MaskVolume read_nifti_mask(const std::filesystem::path& path, MaskRole role) {
  return to_mask(read_nifti(path), role);
}

void write_nifti(const Volume& volume, const std::filesystem::path& path) {
  require(volume.dims.count() > 0, ErrorCode::kInvalidArgument,
          "write_nifti: volume has a zero extent (" + to_string(volume.dims) + ")");
  require(volume.voxels.size() == volume.dims.count(), ErrorCode::kInvalidArgument,
          "write_nifti: buffer does not match dims");
  constexpr std::size_t kMaxExtent = 32767;
  require(volume.dims.x <= kMaxExtent && volume.dims.y <= kMaxExtent && volume.dims.z <= kMaxExtent,
          ErrorCode::kInvalidArgument, "write_nifti: extent exceeds NIfTI-1 limit");

  NiftiHeaderBytes h = volume.header.value_or(fresh_header());
  store<std::int32_t>(h.data(), field::kSizeofHdr, static_cast<std::int32_t>(kHeaderSize));
  const std::int16_t dim[8] = {3,
                               static_cast<std::int16_t>(volume.dims.x),
                               static_cast<std::int16_t>(volume.dims.y),
                               static_cast<std::int16_t>(volume.dims.z),
                               1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) store<std::int16_t>(h.data(), field::kDim + 2 * i, dim[i]);
  store<std::int16_t>(h.data(), field::kDatatype, kFloat32);
  store<std::int16_t>(h.data(), field::kBitpix, 32);
  store<float>(h.data(), field::kVoxOffset, static_cast<float>(kDefaultVoxOffset));
  store<float>(h.data(), field::kSclSlope, 1.0f);
  store<float>(h.data(), field::kSclInter, 0.0f);
  store<float>(h.data(), field::kCalMax, 0.0f);
  store<float>(h.data(), field::kCalMin, 0.0f);
  std::memcpy(h.data() + field::kMagic, "n+1\0", 4);

  detail::ByteWriter out;
  out.put_bytes(h.data(), kHeaderSize);
  out.put<std::uint32_t>(0);  // no extensions
  for (float v : volume.voxels) out.put<float>(v);
  write_maybe_gzip(path, out.bytes());
}

void write_nifti(const MaskVolume& mask, const std::filesystem::path& path) {
  write_nifti(to_volume(mask), path);
}

void write_raw(const Volume& volume, const std::filesystem::path& stem) {
  require(volume.voxels.size() == volume.dims.count(), ErrorCode::kInvalidArgument,
          "write_raw: buffer does not match dims");
  detail::ByteWriter out;
  out.put<std::uint32_t>(static_cast<std::uint32_t>(volume.dims.x));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(volume.dims.y));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(volume.dims.z));
  for (float v : volume.voxels) out.put<float>(v);
  auto raw_path = stem;
  raw_path += ".vraw";
  detail::write_file(raw_path, out.bytes());

  nlohmann::ordered_json meta;
  meta["dims"] = {volume.dims.x, volume.dims.y, volume.dims.z};
  meta["domain"] = std::string(to_string(volume.domain));
  if (volume.max_intensity) {
    meta["max_intensity"] = *volume.max_intensity;
  } else {
    meta["max_intensity"] = nullptr;
  }
  auto json_path = stem;
  json_path += ".vjson";
  std::ofstream js(json_path);
  if (!js) fail(ErrorCode::kIo, "cannot write " + json_path.string());
  js << meta.dump(2) << '\n';
}

Volume read_raw(const std::filesystem::path& stem) {
  auto raw_path = stem;
  raw_path += ".vraw";
  auto json_path = stem;
  json_path += ".vjson";
  const auto bytes = detail::read_file(raw_path);
  detail::ByteReader in(bytes.data(), bytes.size(), raw_path.string());
  Dims dims;
  dims.x = in.get<std::uint32_t>();
  dims.y = in.get<std::uint32_t>();
  dims.z = in.get<std::uint32_t>();
  Volume volume(dims);
  for (auto& v : volume.voxels) v = in.get<float>();
  require(in.at_end(), ErrorCode::kDimMismatch, raw_path.string() + ": trailing bytes after voxels");

  std::ifstream js(json_path);
  if (!js) fail(ErrorCode::kMissingInput, "cannot open " + json_path.string());
  try {
    const auto meta = nlohmann::json::parse(js);
    const auto d = meta.at("dims").get<std::vector<std::size_t>>();
    require(d.size() == 3 && Dims{d[0], d[1], d[2]} == dims, ErrorCode::kDimMismatch,
            json_path.string() + ": dims disagree with " + raw_path.string());
    volume.domain = domain_from_string(meta.at("domain").get<std::string>());
    if (!meta.at("max_intensity").is_null()) volume.max_intensity = meta.at("max_intensity").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, json_path.string() + ": " + e.what());
  }
  return volume;
}

}  // namespace voxelpaint
