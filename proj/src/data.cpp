#include "hhgr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <iomanip>
#include <locale>
#include <map>
#include <numeric>
#include <sstream>

#include "hhgr/error.hpp"

namespace hhgr {

// ---------------------------------------------------------------------------
// BinaryMatrix

BinaryMatrix::BinaryMatrix(std::size_t rows, std::size_t cols,
                           std::vector<std::pair<Id, Id>> entries)
    : rows_(rows), cols_(cols), offsets_(rows + 1, 0) {
  for (const auto& [r, c] : entries) {
    if (r < 0 || c < 0 || static_cast<std::size_t>(r) >= rows ||
        static_cast<std::size_t>(c) >= cols) {
      throw ValidationError("entry (" + std::to_string(r) + ", " + std::to_string(c) +
                            ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
  indices_.reserve(entries.size());
  for (const auto& [r, c] : entries) {
    ++offsets_[r + 1];
    indices_.push_back(c);
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
}

bool BinaryMatrix::contains(Id r, Id c) const {
  auto cols = row(r);
  return std::binary_search(cols.begin(), cols.end(), c);
}

std::vector<std::pair<Id, Id>> BinaryMatrix::entries() const {
  std::vector<std::pair<Id, Id>> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (Id c : row(static_cast<Id>(r))) out.emplace_back(static_cast<Id>(r), c);
  }
  return out;
}

BinaryMatrix BinaryMatrix::transposed() const {
  auto e = entries();
  for (auto& [r, c] : e) std::swap(r, c);
  return BinaryMatrix(cols_, rows_, std::move(e));
}

// ---------------------------------------------------------------------------
// Invariants

void InteractionDataset::validate() const {
  if (user_item.rows() != num_users || user_item.cols() != num_items) {
    throw ValidationError("user-item matrix is " + std::to_string(user_item.rows()) + "x" +
                          std::to_string(user_item.cols()) + ", expected " +
                          std::to_string(num_users) + "x" + std::to_string(num_items));
  }
  if (group_item.rows() != num_groups || group_item.cols() != num_items) {
    throw ValidationError("group-item matrix is " + std::to_string(group_item.rows()) + "x" +
                          std::to_string(group_item.cols()) + ", expected " +
                          std::to_string(num_groups) + "x" + std::to_string(num_items));
  }
  if (membership.size() != num_groups) {
    throw ValidationError("membership lists " + std::to_string(membership.size()) +
                          " groups, expected " + std::to_string(num_groups));
  }
  for (std::size_t g = 0; g < num_groups; ++g) {
    const auto& members = membership[g];
    if (members.empty()) throw ValidationError("group " + std::to_string(g) + " has no members");
    if (!std::is_sorted(members.begin(), members.end()) ||
        std::adjacent_find(members.begin(), members.end()) != members.end()) {
      throw ValidationError("membership of group " + std::to_string(g) +
                            " is not sorted and unique");
    }
    for (Id u : members) {
      if (u < 0 || static_cast<std::size_t>(u) >= num_users) {
        throw ValidationError("group " + std::to_string(g) + " references unknown user " +
                              std::to_string(u));
      }
    }
  }
}

std::size_t Holdout::interactions() const {
  std::size_t n = 0;
  for (const auto& row : items) n += row.size();
  return n;
}

// ---------------------------------------------------------------------------
// TSV I/O

DatasetPaths DatasetPaths::in_directory(const std::filesystem::path& dir) {
  return {dir / "users.tsv", dir / "groups_items.tsv", dir / "membership.tsv"};
}

namespace {

struct HeaderCounts {
  std::optional<std::size_t> users, items, groups;
};

struct PairFile {
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
  HeaderCounts header;
};

std::int64_t parse_id(std::string_view token, const std::string& path, std::size_t line) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || value < 0) {
    throw ParseError(path, line, "expected non-negative integer id, got '" + std::string(token) + "'");
  }
  return value;
}

void parse_header(std::string_view text, HeaderCounts& header, const std::string& path,
                  std::size_t line) {
  std::istringstream in{std::string(text)};
  std::string field;
  while (in >> field) {
    auto eq = field.find('=');
    if (eq == std::string::npos) throw ParseError(path, line, "malformed header field '" + field + "'");
    auto key = field.substr(0, eq);
    auto value = static_cast<std::size_t>(parse_id(std::string_view(field).substr(eq + 1), path, line));
    if (key == "users") header.users = value;
    else if (key == "items") header.items = value;
    else if (key == "groups") header.groups = value;
    else throw ParseError(path, line, "unknown header key '" + key + "'");
  }
}

PairFile read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("data: cannot open " + path.string());
  PairFile out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '%') {
      parse_header(std::string_view(line).substr(1), out.header, path.string(), number);
      continue;
    }
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError(path.string(), number, "expected two tab-separated ids");
    }
    std::string_view view(line);
    out.pairs.emplace_back(parse_id(view.substr(0, tab), path.string(), number),
                           parse_id(view.substr(tab + 1), path.string(), number));
  }
  return out;
}

std::size_t resolve_count(const char* what, std::size_t inferred,
                          std::initializer_list<std::optional<std::size_t>> headers) {
  std::optional<std::size_t> declared;
  for (const auto& h : headers) {
    if (!h) continue;
    if (declared && *declared != *h) {
      throw ValidationError(std::string("data: conflicting header counts for ") + what);
    }
    declared = h;
  }
  if (!declared) return inferred;
  if (*declared < inferred) {
    throw ValidationError(std::string("data: header declares ") + std::to_string(*declared) + " " +
                          what + " but ids up to " + std::to_string(inferred - 1) + " are used");
  }
  return *declared;
}

class Compactor {
 public:
  void see(std::int64_t id) { ids_.push_back(id); }
  std::vector<std::int64_t> finish() {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    return ids_;
  }

 private:
  std::vector<std::int64_t> ids_;
};

Id lookup(const std::vector<std::int64_t>& table, std::int64_t id) {
  auto it = std::lower_bound(table.begin(), table.end(), id);
  return static_cast<Id>(it - table.begin());
}

}  // namespace

InteractionDataset load_dataset(const DatasetPaths& paths, const LoadOptions& options,
                                IdMaps* id_maps) {
  auto ui = read_pairs(paths.user_item);
  auto gi = read_pairs(paths.group_item);
  auto gm = read_pairs(paths.membership);

  if (options.compact_ids) {
    Compactor users, items, groups;
    for (auto [u, i] : ui.pairs) users.see(u), items.see(i);
    for (auto [g, i] : gi.pairs) groups.see(g), items.see(i);
    for (auto [g, u] : gm.pairs) groups.see(g), users.see(u);
    IdMaps maps{users.finish(), items.finish(), groups.finish()};
    for (auto& [u, i] : ui.pairs) u = lookup(maps.users, u), i = lookup(maps.items, i);
    for (auto& [g, i] : gi.pairs) g = lookup(maps.groups, g), i = lookup(maps.items, i);
    for (auto& [g, u] : gm.pairs) g = lookup(maps.groups, g), u = lookup(maps.users, u);
    gi.header = gm.header = {};
    ui.header = {maps.users.size(), maps.items.size(), maps.groups.size()};
    if (id_maps) *id_maps = std::move(maps);
  }

  constexpr std::int64_t kMaxId = std::numeric_limits<Id>::max() - 1;
  std::int64_t max_user = -1, max_item = -1, max_group = -1;
  for (auto [u, i] : ui.pairs) max_user = std::max(max_user, u), max_item = std::max(max_item, i);
  for (auto [g, i] : gi.pairs) max_group = std::max(max_group, g), max_item = std::max(max_item, i);
  for (auto [g, u] : gm.pairs) max_group = std::max(max_group, g);
  if (std::max({max_user, max_item, max_group}) > kMaxId) {
    throw ValidationError("data: id exceeds 32-bit range; load with id compaction");
  }

  InteractionDataset ds;
  ds.num_users = resolve_count("users", static_cast<std::size_t>(max_user + 1),
                               {ui.header.users, gi.header.users, gm.header.users});
  ds.num_items = resolve_count("items", static_cast<std::size_t>(max_item + 1),
                               {ui.header.items, gi.header.items, gm.header.items});
  ds.num_groups = resolve_count("groups", static_cast<std::size_t>(max_group + 1),
                                {ui.header.groups, gi.header.groups, gm.header.groups});

  auto narrow = [](const std::vector<std::pair<std::int64_t, std::int64_t>>& in) {
    std::vector<std::pair<Id, Id>> out;
    out.reserve(in.size());
    for (auto [a, b] : in) out.emplace_back(static_cast<Id>(a), static_cast<Id>(b));
    return out;
  };
  ds.user_item = BinaryMatrix(ds.num_users, ds.num_items, narrow(ui.pairs));
  ds.group_item = BinaryMatrix(ds.num_groups, ds.num_items, narrow(gi.pairs));

  ds.membership.assign(ds.num_groups, {});
  for (auto [g, u] : gm.pairs) {
    if (static_cast<std::size_t>(u) >= ds.num_users) {
      throw ValidationError("data: membership of group " + std::to_string(g) +
                            " references unknown user " + std::to_string(u) + " (" +
                            std::to_string(ds.num_users) + " users)");
    }
    ds.membership[g].push_back(static_cast<Id>(u));
  }
  for (auto& members : ds.membership) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
  }
  ds.validate();
  return ds;
}

void save_dataset(const InteractionDataset& ds, const DatasetPaths& paths) {
  auto header = "% users=" + std::to_string(ds.num_users) + " items=" + std::to_string(ds.num_items) +
                " groups=" + std::to_string(ds.num_groups) + "\n";
  auto write = [&](const std::filesystem::path& path, const std::vector<std::pair<Id, Id>>& pairs) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ValidationError("data: cannot write " + path.string());
    out << header;
    for (auto [a, b] : pairs) out << a << '\t' << b << '\n';
  };
  write(paths.user_item, ds.user_item.entries());
  write(paths.group_item, ds.group_item.entries());
  std::vector<std::pair<Id, Id>> members;
  for (std::size_t g = 0; g < ds.membership.size(); ++g) {
    for (Id u : ds.membership[g]) members.emplace_back(static_cast<Id>(g), u);
  }
  write(paths.membership, members);
}

void save_id_maps(const IdMaps& maps, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "id_map.tsv");
  out << "# kind\tinternal\texternal\n";
  auto dump = [&](const char* kind, const std::vector<std::int64_t>& table) {
    for (std::size_t i = 0; i < table.size(); ++i) out << kind << '\t' << i << '\t' << table[i] << '\n';
  };
  dump("user", maps.users);
  dump("item", maps.items);
  dump("group", maps.groups);
}

std::string format_stats(const InteractionDataset& ds, const std::string& name) {
  auto grouped = [](std::size_t n) {
    auto digits = std::to_string(n);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
      out += digits[i];
    }
    return out;
  };
  std::ostringstream os;
  os << std::left << std::setw(16) << "Dataset" << std::right << std::setw(10) << "#User"
     << std::setw(10) << "#Item" << std::setw(10) << "#Group" << std::setw(16) << "#U-I Feedback"
     << std::setw(16) << "#G-I Feedback" << '\n';
  os << std::left << std::setw(16) << name << std::right << std::setw(10) << grouped(ds.num_users)
     << std::setw(10) << grouped(ds.num_items) << std::setw(10) << grouped(ds.num_groups)
     << std::setw(16) << grouped(ds.user_item.nnz()) << std::setw(16)
     << grouped(ds.group_item.nnz()) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Splitting

SplitDataset split_groups(const InteractionDataset& ds, const SplitRatios& ratios,
                          std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.validation <= 0 || ratios.test <= 0) {
    throw SplitError("split: ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw SplitError("split: ratios must sum to 1");
  }
  const std::size_t n = ds.num_groups;
  const auto n_val = static_cast<std::size_t>(std::llround(ratios.validation * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(ratios.test * static_cast<double>(n)));
  if (n_val == 0 || n_test == 0 || n_val + n_test >= n) {
    throw SplitError("split: " + std::to_string(n) +
                     " groups cannot fill train/validation/test with at least one group each");
  }

  std::vector<Id> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto take = [&](std::size_t begin, std::size_t end) {
    std::vector<Id> part(order.begin() + static_cast<std::ptrdiff_t>(begin),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(part.begin(), part.end());
    return part;
  };
  auto holdout = [&](std::vector<Id> groups) {
    Holdout h;
    for (Id g : groups) {
      auto row = ds.group_item.row(g);
      h.items.emplace_back(row.begin(), row.end());
    }
    h.groups = std::move(groups);
    return h;
  };

  SplitDataset split;
  split.split_seed = seed;
  split.validation = holdout(take(0, n_val));
  split.test = holdout(take(n_val, n_val + n_test));
  split.train_groups = take(n_val + n_test, n);

  split.train = ds;
  std::vector<std::pair<Id, Id>> kept;
  for (Id g : split.train_groups) {
    for (Id i : ds.group_item.row(g)) kept.emplace_back(g, i);
  }
  split.train.group_item = BinaryMatrix(ds.num_groups, ds.num_items, std::move(kept));

  split.group_interaction_counts.resize(n);
  for (std::size_t g = 0; g < n; ++g) {
    split.group_interaction_counts[g] = ds.group_item.row(static_cast<Id>(g)).size();
  }
  return split;
}

// ---------------------------------------------------------------------------
// Negative sampling

TripleSampler::TripleSampler(BinaryMatrix interactions, std::size_t negatives_per_triple,
                             std::uint64_t seed)
    : interactions_(std::move(interactions)), n_neg_(negatives_per_triple), rng_(seed) {
  if (n_neg_ < 1) throw SamplingError("sampling: negatives per triple must be >= 1");
  for (std::size_t s = 0; s < interactions_.rows(); ++s) {
    auto positives = interactions_.row(static_cast<Id>(s)).size();
    if (positives > 0 && positives == interactions_.cols()) {
      throw SamplingError("sampling: subject " + std::to_string(s) +
                          " interacted with every item; no negatives available");
    }
  }
}

Id TripleSampler::sample_negative(Id subject) {
  auto positives = interactions_.row(subject);
  const auto pool = interactions_.cols() - positives.size();
  if (pool == 0) {
    throw SamplingError("sampling: subject " + std::to_string(subject) + " has no unobserved items");
  }
  // k-th unobserved item: walk past the sorted positives that precede it.
  Id item = static_cast<Id>(std::uniform_int_distribution<std::size_t>(0, pool - 1)(rng_));
  for (Id p : positives) {
    if (p <= item) ++item;
    else break;
  }
  return item;
}

std::vector<TrainingTriple> TripleSampler::next_epoch() {
  std::vector<TrainingTriple> triples;
  triples.reserve(interactions_.nnz());
  for (auto [s, i] : interactions_.entries()) {
    TrainingTriple t{s, i, {}};
    t.negatives.reserve(n_neg_);
    for (std::size_t k = 0; k < n_neg_; ++k) t.negatives.push_back(sample_negative(s));
    triples.push_back(std::move(t));
  }
  std::shuffle(triples.begin(), triples.end(), rng_);
  return triples;
}

TripleSampler sample_triples(const InteractionDataset& ds, SubjectKind kind,
                             std::size_t negatives_per_triple, std::uint64_t seed) {
  return TripleSampler(kind == SubjectKind::User ? ds.user_item : ds.group_item,
                       negatives_per_triple, seed);
}

// ---------------------------------------------------------------------------
// Seeds

std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index) {
  // FNV-1a over the stream name keeps child seeds stable across platforms.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace hhgr
