#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmbeam/core/csv.hpp"
#include "mmbeam/core/rng.hpp"

namespace mmbeam::data {

constexpr const char* kIndexHeader =
    "sample_id,image_relpath,lidar_relpath,latitude,longitude,beam_index";

struct IndexRecord {
  std::string sample_id;
  std::string image_relpath;
  std::string lidar_relpath;
  double latitude = 0.0;
  double longitude = 0.0;
  int beam_index = 0;
};

struct DatasetIndex {
  std::vector<IndexRecord> records;
  std::filesystem::path base_dir;  // relpaths resolve against this
  uint64_t split_seed = 0;
  std::array<double, 3> split_fracs = {0.8, 0.1, 0.1};

  std::filesystem::path image_path(const IndexRecord& r) const {
    return base_dir / r.image_relpath;
  }
  std::filesystem::path lidar_path(const IndexRecord& r) const {
    return base_dir / r.lidar_relpath;
  }
};

// Parse the index CSV. Columns are matched by header name, so any column
// order round-trips. Beam labels are validated against codebook size M;
// errors name the offending 1-based data row.
inline DatasetIndex load_index(const std::filesystem::path& path, int M,
                               bool check_paths = true) {
  auto rows = read_csv(path.string());
  if (rows.empty()) throw std::runtime_error(path.string() + ": empty index");
  const std::vector<std::string> want = {"sample_id", "image_relpath",
                                         "lidar_relpath", "latitude",
                                         "longitude",  "beam_index"};
  std::map<std::string, int> col;
  for (size_t j = 0; j < rows[0].size(); ++j) col[rows[0][j]] = static_cast<int>(j);
  for (const auto& name : want)
    if (!col.count(name))
      throw std::runtime_error(path.string() + ": missing column '" + name + "'");

  DatasetIndex idx;
  idx.base_dir = path.parent_path();
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& cells = rows[i];
    const std::string where = path.string() + ": row " + std::to_string(i);
    if (cells.size() != rows[0].size())
      throw std::runtime_error(where + ": wrong number of fields");
    IndexRecord r;
    r.sample_id = cells[col["sample_id"]];
    r.image_relpath = cells[col["image_relpath"]];
    r.lidar_relpath = cells[col["lidar_relpath"]];
    bool ok = false;
    r.latitude = parse_double(cells[col["latitude"]], &ok);
    if (!ok) throw std::runtime_error(where + ": non-numeric latitude");
    r.longitude = parse_double(cells[col["longitude"]], &ok);
    if (!ok) throw std::runtime_error(where + ": non-numeric longitude");
    long label = parse_long(cells[col["beam_index"]], &ok);
    if (!ok) throw std::runtime_error(where + ": non-numeric beam_index");
    if (label < 0 || label >= M)
      throw std::runtime_error(where + ": beam_index " + std::to_string(label) +
                               " out of range [0, " + std::to_string(M) + ")");
    r.beam_index = static_cast<int>(label);
    if (check_paths) {
      if (!std::filesystem::exists(idx.base_dir / r.image_relpath))
        throw std::runtime_error(where + ": missing image file " + r.image_relpath);
      if (!std::filesystem::exists(idx.base_dir / r.lidar_relpath))
        throw std::runtime_error(where + ": missing lidar file " + r.lidar_relpath);
    }
    idx.records.push_back(std::move(r));
  }
  return idx;
}

inline void save_index(const DatasetIndex& idx, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << kIndexHeader << '\n';
  for (const IndexRecord& r : idx.records) {
    os << r.sample_id << ',' << r.image_relpath << ',' << r.lidar_relpath << ','
       << fmt_num(r.latitude) << ',' << fmt_num(r.longitude) << ','
       << r.beam_index << '\n';
  }
}

struct SplitResult {
  DatasetIndex train, val, test;
};

// Deterministic 3-way split. Stratified per beam label when every label has
// at least 3 samples, otherwise a plain shuffle. Per-split totals follow a
// running-remainder cascade so they land within one sample of the exact
// fractions both globally and per label.
inline SplitResult split(const DatasetIndex& index) {
  const auto& fr = index.split_fracs;
  double sum = fr[0] + fr[1] + fr[2];
  if (fr[0] <= 0 || fr[1] <= 0 || fr[2] <= 0 || std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split: fractions must be positive and sum to 1");
  const int n = static_cast<int>(index.records.size());
  if (n < 10) throw std::invalid_argument("split: need at least 10 samples");

  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[index.records[i].beam_index].push_back(i);
  bool stratified = true;
  for (const auto& [label, members] : groups)
    if (members.size() < 3) stratified = false;
  if (!stratified) {
    groups.clear();
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    groups[0] = std::move(all);
  }

  SplitResult out;
  for (DatasetIndex* part : {&out.train, &out.val, &out.test}) {
    part->base_dir = index.base_dir;
    part->split_seed = index.split_seed;
    part->split_fracs = index.split_fracs;
  }

  double acc_train = 0.0, acc_val = 0.0;
  int taken_train = 0, taken_val = 0;
  Rng base(index.split_seed);
  for (auto& [label, members] : groups) {
    Rng rng = base.fork(static_cast<uint64_t>(label));
    rng.shuffle(members);
    const int g = static_cast<int>(members.size());
    acc_train += fr[0] * g;
    int take_train = static_cast<int>(std::llround(acc_train)) - taken_train;
    taken_train += take_train;
    acc_val += fr[1] * g;
    int take_val = static_cast<int>(std::llround(acc_val)) - taken_val;
    taken_val += take_val;
    for (int i = 0; i < g; ++i) {
      const IndexRecord& r = index.records[members[i]];
      if (i < take_train)
        out.train.records.push_back(r);
      else if (i < take_train + take_val)
        out.val.records.push_back(r);
      else
        out.test.records.push_back(r);
    }
  }
  return out;
}

}  // namespace mmbeam::data
