#include "trainer/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <sys/stat.h>
#include <thread>

#include "common/hash.hpp"
#include "common/kvconfig.hpp"

namespace ctae {

namespace {

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

bool file_exists(const std::string& path) {
  struct stat st;
  return ::stat(path.c_str(), &st) == 0;
}

std::string cell_meta_path(const std::string& dir, const std::string& hash) {
  return dir + "/cell_" + hash + ".meta";
}
std::string cell_ckpt_path(const std::string& dir, const std::string& hash) {
  return dir + "/cell_" + hash + ".ckpt";
}

// kv text for '#' and newline safety in cached error messages
std::string sanitize(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r' || c == '#') c = ' ';
  return s;
}

bool try_load_cached(const std::string& dir, GridCellResult& cell) {
  const std::string meta = cell_meta_path(dir, cell.config_hash);
  if (!file_exists(meta)) return false;
  KvConfig kv = KvConfig::from_file(meta);
  const bool diverged = kv.get_bool("diverged");
  const double val = kv.get_double("val_total");
  const std::string error = kv.get_string("error", "");
  if (diverged) {
    cell.diverged = true;
    cell.val_total = std::numeric_limits<double>::infinity();
    cell.error = error;
  } else {
    cell.best = load_checkpoint(cell_ckpt_path(dir, cell.config_hash));
    cell.val_total = val;
  }
  cell.cached = true;
  return true;
}

void store_cached(const std::string& dir, const GridCellResult& cell) {
  if (!cell.diverged) save_checkpoint(cell_ckpt_path(dir, cell.config_hash), cell.best);
  // the meta file is written last: its presence marks the cell complete
  const std::string meta = cell_meta_path(dir, cell.config_hash);
  std::ofstream out(meta, std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write grid cache entry: " + meta);
  out << "diverged = " << (cell.diverged ? "true" : "false") << "\n"
      << "val_total = " << fmt(cell.diverged ? 0.0 : cell.val_total) << "\n";
  if (!cell.error.empty()) out << "error = " << sanitize(cell.error) << "\n";
  if (!out) fail(ErrorKind::io, "write failed: " + meta);
}

void run_cell(GridCellResult& cell, const std::vector<RegionRecording>& data,
              const std::string& cache_dir) {
  if (!cache_dir.empty() && try_load_cached(cache_dir, cell)) return;
  try {
    TrainOutcome out = train(cell.config, data);
    cell.best = std::move(out.best);
    cell.val_total = cell.best.best_val;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::numeric) throw;  // only divergence is survivable
    cell.diverged = true;
    cell.val_total = std::numeric_limits<double>::infinity();
    cell.error = e.what();
  }
  if (!cache_dir.empty()) store_cached(cache_dir, cell);
}

}  // namespace

void GridSpec::validate() const {
  if (layers.empty() || latent_dims.empty() || lambda_shared.empty() || lambda_align.empty() ||
      lambda_orth.empty() || learning_rates.empty() || warmups.empty())
    fail(ErrorKind::config, "grid has an empty dimension");
  for (const int64_t d : latent_dims)
    if (d < 1) fail(ErrorKind::config, "grid latent dims must be >= 1");
  if (epochs_cap < 0) fail(ErrorKind::config, "grid epoch cap must be >= 0");
}

MembershipMask default_latent_layout(int64_t regions, int64_t d) {
  if (regions < 2) fail(ErrorKind::config, "latent layout needs at least 2 regions");
  if (d < 1) fail(ErrorKind::config, "latent layout needs at least 1 dimension");
  const int64_t per_private = d / (regions + 1);
  const int64_t shared = d - regions * per_private;
  std::vector<std::pair<uint32_t, int64_t>> blocks;
  blocks.push_back({(1u << regions) - 1u, shared});
  for (int64_t r = 0; r < regions; ++r)
    blocks.push_back({1u << (regions - 1 - r), per_private});
  return build_membership(regions, blocks);
}

GridOutcome grid_search(const TrainConfig& base, const GridSpec& grid,
                        const std::vector<RegionRecording>& data, int jobs,
                        const std::string& cache_dir) {
  grid.validate();
  if (data.empty()) fail(ErrorKind::shape, "grid search needs data");
  const int64_t regions = static_cast<int64_t>(data.size());

  std::vector<GridCellResult> cells;
  for (const int64_t layers : grid.layers)
    for (const int64_t d : grid.latent_dims)
      for (const double ls : grid.lambda_shared)
        for (const double la : grid.lambda_align)
          for (const double lo : grid.lambda_orth)
            for (const double lr : grid.learning_rates)
              for (const int64_t warmup : grid.warmups) {
                GridCellResult cell;
                cell.cell_index = static_cast<int64_t>(cells.size());
                cell.config = base;
                cell.config.model.layers = layers;
                cell.config.mask = default_latent_layout(regions, d);
                cell.config.weights.shared = ls;
                cell.config.weights.align = la;
                cell.config.weights.orth = lo;
                cell.config.weights.warmup_epochs = warmup;
                cell.config.lr = lr;
                if (grid.epochs_cap > 0)
                  cell.config.epochs = std::min(base.epochs, grid.epochs_cap);
                cell.config = resolve_config(cell.config, data);
                cell.config_hash = config_hash(to_kv_text(cell.config));
                cells.push_back(std::move(cell));
              }

  if (jobs <= 1 || cells.size() == 1) {
    for (auto& cell : cells) run_cell(cell, data, cache_dir);
  } else {
    std::atomic<size_t> next{0};
    std::mutex err_mtx;
    std::exception_ptr first_error;
    auto worker = [&] {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= cells.size()) return;
        try {
          run_cell(cells[i], data, cache_dir);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mtx);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    const size_t n = std::min(static_cast<size_t>(jobs), cells.size());
    for (size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  bool any_converged = false;
  for (const auto& cell : cells) any_converged |= !cell.diverged;
  if (!any_converged) fail(ErrorKind::numeric, "every grid cell diverged");

  GridOutcome out;
  out.ranked = std::move(cells);
  std::sort(out.ranked.begin(), out.ranked.end(),
            [](const GridCellResult& a, const GridCellResult& b) {
              if (a.diverged != b.diverged) return !a.diverged;
              if (a.diverged) return a.cell_index < b.cell_index;
              if (a.val_total != b.val_total) return a.val_total < b.val_total;
              if (a.config.mask.dim != b.config.mask.dim)
                return a.config.mask.dim < b.config.mask.dim;
              return a.cell_index < b.cell_index;
            });
  return out;
}

}  // namespace ctae
