#include "voxelpaint/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <json.hpp>

#include "byte_io.hpp"
#include "voxelpaint/error.hpp"

namespace voxelpaint {

namespace {

constexpr char kMagic[4] = {'V', 'X', 'P', 'T'};

nlohmann::ordered_json metadata_json(const UNetConfig& config, const CheckpointMetadata& meta) {
  nlohmann::ordered_json j;
  j["config"] = {{"base_channels", config.base_channels},
                 {"in_channels", config.in_channels},
                 {"out_channels", config.out_channels},
                 {"dropout_rate", config.dropout_rate},
                 {"kernel_size", config.kernel_size}};
  j["epoch"] = meta.epoch;
  j["fold"] = meta.fold;
  if (std::isfinite(meta.val_loss)) {
    j["val_loss"] = meta.val_loss;
  } else {
    j["val_loss"] = nullptr;
  }
  j["seed"] = meta.seed;
  return j;
}

struct ParsedFile {
  UNetConfig config;
  CheckpointMetadata metadata;
  struct Record {
    std::string name;
    Shape shape;
    std::vector<float> data;
  };
  std::vector<Record> records;
};

ParsedFile parse(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader in(bytes.data(), bytes.size(), "checkpoint " + path.string());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorCode::kBadMagic, "checkpoint " + path.string() + ": bad magic bytes");
  }
  in.take(4);
  const auto version = in.get<std::uint32_t>();
  require(version == kCheckpointVersion, ErrorCode::kVersionMismatch,
          "checkpoint " + path.string() + ": unsupported version " + std::to_string(version));
  const auto meta_len = in.get<std::uint32_t>();
  const auto* meta_raw = in.take(meta_len);

  ParsedFile parsed;
  try {
    const auto j = nlohmann::json::parse(meta_raw, meta_raw + meta_len);
    const auto& c = j.at("config");
    parsed.config.base_channels = c.at("base_channels").get<int>();
    parsed.config.in_channels = c.at("in_channels").get<int>();
    parsed.config.out_channels = c.at("out_channels").get<int>();
    parsed.config.dropout_rate = c.at("dropout_rate").get<double>();
    parsed.config.kernel_size = c.at("kernel_size").get<int>();
    parsed.metadata.epoch = j.at("epoch").get<int>();
    parsed.metadata.fold = j.at("fold").get<int>();
    parsed.metadata.val_loss = j.at("val_loss").is_null()
                                   ? std::numeric_limits<double>::quiet_NaN()
                                   : j.at("val_loss").get<double>();
    parsed.metadata.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, "checkpoint " + path.string() + ": malformed metadata: " + e.what());
  }

  while (!in.at_end()) {
    ParsedFile::Record record;
    const auto name_len = in.get<std::uint16_t>();
    const auto* name = in.take(name_len);
    record.name.assign(reinterpret_cast<const char*>(name), name_len);
    const auto rank = in.get<std::uint8_t>();
    for (std::uint8_t i = 0; i < rank; ++i) record.shape.push_back(in.get<std::uint32_t>());
    record.data.resize(shape_numel(record.shape));
    for (auto& v : record.data) v = in.get<float>();
    parsed.records.push_back(std::move(record));
  }
  return parsed;
}

LoadedCheckpoint assemble(const ParsedFile& parsed, const UNetConfig& config,
                          const std::filesystem::path& path) {
  Rng scratch(0);
  LoadedCheckpoint out{UNetModel<float>::build(config, scratch), parsed.metadata};
  const auto& expected = out.model.named_parameters();
  require(parsed.records.size() == expected.size(), ErrorCode::kShapeMismatch,
          "checkpoint " + path.string() + ": holds " + std::to_string(parsed.records.size()) +
              " parameters, model expects " + std::to_string(expected.size()));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& record = parsed.records[i];
    require(record.name == expected[i].name, ErrorCode::kNameMismatch,
            "checkpoint " + path.string() + ": record " + std::to_string(i) + " is '" + record.name +
                "', expected '" + expected[i].name + "'");
    require(record.shape == expected[i].tensor.shape(), ErrorCode::kShapeMismatch,
            "checkpoint " + path.string() + ": '" + record.name + "' has shape " +
                shape_string(record.shape) + ", expected " +
                shape_string(expected[i].tensor.shape()));
    auto dst = out.model.parameter(record.name).mutable_values();
    std::copy(record.data.begin(), record.data.end(), dst.begin());
  }
  return out;
}

}  // namespace

void save_checkpoint(const UNetModel<float>& model, const CheckpointMetadata& metadata,
                     const std::filesystem::path& path) {
  detail::ByteWriter out;
  out.put_bytes(kMagic, 4);
  out.put<std::uint32_t>(kCheckpointVersion);
  const std::string meta = metadata_json(model.config(), metadata).dump();
  out.put<std::uint32_t>(static_cast<std::uint32_t>(meta.size()));
  out.put_bytes(meta.data(), meta.size());
  for (const auto& p : model.named_parameters()) {
    out.put<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
    out.put_bytes(p.name.data(), p.name.size());
    out.put<std::uint8_t>(static_cast<std::uint8_t>(p.tensor.rank()));
    for (std::size_t extent : p.tensor.shape()) out.put<std::uint32_t>(static_cast<std::uint32_t>(extent));
    for (float v : p.tensor.values()) out.put<float>(v);
  }
  detail::write_file(path, out.bytes());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const ParsedFile parsed = parse(path);
  try {
    parsed.config.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kMalformed, "checkpoint " + path.string() + ": " + e.what());
  }
  return assemble(parsed, parsed.config, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const UNetConfig& expected) {
  return assemble(parse(path), expected, path);
}

}  // namespace voxelpaint
