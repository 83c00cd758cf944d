#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <thread>

#include <omp.h>

#include "gwhp/dataset.hpp"
#include "gwhp/error.hpp"
#include "gwhp/random.hpp"

namespace gwhp {

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  LoadedDataset data;
  for (const auto& path : list_samples(dir)) {
    data.samples.push_back(load_sample(path));
    data.ids.push_back(path.stem().string());
  }
  if (data.samples.empty()) throw ValidationError("no samples in '" + dir.string() + "'");
  return data;
}

ScenarioSpec scenario_for(std::uint64_t seed, int index, const GeologyConfig& geology) {
  ScenarioSpec spec;
  spec.geology = draw_geology(mix_seed(seed, static_cast<std::uint64_t>(index)), geology);
  spec.well.cell = center_cell_index(spec.grid);
  return spec;
}

std::string sample_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%05d", index);
  return buf;
}

GenerateReport generate_dataset(const std::filesystem::path& dir, int count, std::uint64_t seed,
                                int workers, const GeologyConfig& geology) {
  if (count < 1) throw ValidationError("datagen: count must be >= 1");
  if (workers < 1) throw ValidationError("datagen: workers must be >= 1");
  std::filesystem::create_directories(dir);
  std::atomic<int> next{0};
  std::atomic<int> written{0};
  std::mutex failures_mutex;
  GenerateReport report;

  auto work = [&] {
    // one scenario per thread at a time; the solver's own loops stay serial
    if (workers > 1) omp_set_num_threads(1);
    for (int i = next++; i < count; i = next++) {
      const std::string stem = sample_stem(i);
      try {
        save_sample(dir, stem, run_scenario(scenario_for(seed, i, geology)));
        ++written;
      } catch (const std::exception& e) {
        std::lock_guard lock(failures_mutex);
        report.failures.push_back(stem + ": " + e.what());
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(workers, count); ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  report.written = written;
  std::sort(report.failures.begin(), report.failures.end());
  return report;
}

}  // namespace gwhp
