#include "fixtures.hpp"

#include <fstream>
#include <iterator>
#include <system_error>

#include "voxelpaint/dataset.hpp"
#include "voxelpaint/nifti.hpp"
#include "voxelpaint/phantom.hpp"

namespace vptest {

namespace fs = std::filesystem;
using namespace voxelpaint;

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("voxelpaint-test-" + tag);
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir);
  return dir;
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::string> write_phantom_inputs(const fs::path& dir, int count, const Dims& dims,
                                              std::uint64_t seed) {
  fs::create_directories(dir);
  std::vector<std::string> ids;
  for (int i = 0; i < count; ++i) {
    const std::string id = "case" + std::to_string(i);
    const Phantom p = make_phantom(dims, seed + static_cast<std::uint64_t>(i));
    write_nifti(p.t1n, dir / (id + "-t1n.nii.gz"));
    write_nifti(p.tumor, dir / (id + "-seg.nii.gz"));
    ids.push_back(id);
  }
  return ids;
}

std::vector<TrainingSample> phantom_samples(int count, const Dims& dims, std::uint64_t seed,
                                            const MaskGenParams& params) {
  std::vector<TrainingSample> out;
  for (int i = 0; i < count; ++i) {
    const std::string id = "case" + std::to_string(i);
    const Phantom p = make_phantom(dims, seed + static_cast<std::uint64_t>(i));
    auto samples = synthesize_case(id, p.t1n, p.tumor, params, derive_seed(seed, id), 1);
    out.push_back(std::move(samples.front()));
  }
  return out;
}

TrainConfig smoke_config(int epochs, std::uint64_t seed) {
  TrainConfig c;
  c.epochs = epochs;
  c.seed = seed;
  c.base_channels = 8;
  c.crop = Dims{16, 16, 16};
  return c;
}

fs::path data_dir() { return VOXELPAINT_TEST_DATA_DIR; }

}  // namespace vptest
