// Writes synthetic "<case>-t1n.nii.gz" / "<case>-seg.nii.gz" pairs for trying
// the pipeline without real scans.
#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "voxelpaint/error.hpp"
#include "voxelpaint/nifti.hpp"
#include "voxelpaint/phantom.hpp"
#include "voxelpaint/random.hpp"

using namespace voxelpaint;

int main(int argc, char** argv) {
  CLI::App app{"voxelpaint_phantoms: synthetic scan/annotation pairs"};
  std::string out;
  int count = 10;
  std::size_t size = 16;
  std::uint64_t seed = 0;
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--count", count, "number of cases")->check(CLI::PositiveNumber);
  app.add_option("--size", size, "cubic extent in voxels")->check(CLI::Range(8, 512));
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out);
    for (int i = 0; i < count; ++i) {
      const std::string id = "phantom" + std::to_string(i);
      const Phantom p = make_phantom(Dims{size, size, size}, derive_seed(seed, id));
      write_nifti(p.t1n, std::filesystem::path(out) / (id + "-t1n.nii.gz"));
      write_nifti(p.tumor, std::filesystem::path(out) / (id + "-seg.nii.gz"));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  std::cerr << count << " phantom(s) -> " << out << '\n';
  return 0;
}
