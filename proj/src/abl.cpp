#include "partseg/abl.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <tuple>

#include "partseg/detail/text.hpp"
#include "partseg/error.hpp"

namespace partseg {

namespace {

void check_symbol(const Symbol& s) {
  if (s.empty()) throw InvalidArgument("empty symbol");
  for (char c : s) {
    if (c == ',' || c == ':' || c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      throw InvalidArgument("symbol '" + s + "' contains a reserved character");
    }
  }
  if (s.find("->") != Symbol::npos) throw InvalidArgument("symbol '" + s + "' contains '->'");
}

bool is_subset(const SymbolSet& small, const SymbolSet& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

std::string join(const SymbolSet& symbols) {
  std::string out;
  for (const auto& s : symbols) {
    if (!out.empty()) out += ',';
    out += s;
  }
  return out;
}

/// Applicable arguments that win their attack group: within a group sharing
/// one premise set only a strictly heaviest argument survives.
std::vector<Argument> surviving(const std::vector<Argument>& all, const SymbolSet& facts) {
  std::vector<Argument> out;
  // `all` is ordered by (pre, post), so each attack group is contiguous.
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].pre == all[i].pre) ++j;
    if (is_subset(all[i].pre, facts)) {
      std::size_t best = i;
      bool tied = false;
      for (std::size_t m = i + 1; m < j; ++m) {
        if (all[m].weight > all[best].weight) {
          best = m;
          tied = false;
        } else if (all[m].weight == all[best].weight) {
          tied = true;
        }
      }
      if (!tied) out.push_back(all[best]);
    }
    i = j;
  }
  return out;
}

/// Strength order: larger premise set, then larger weight.
bool stronger(const Argument& a, const Argument& b) {
  return std::tuple(a.pre.size(), a.weight) > std::tuple(b.pre.size(), b.weight);
}

}  // namespace

Argument make_argument(SymbolSet pre, Symbol post, std::int64_t weight) {
  if (pre.empty()) throw InvalidArgument("argument premise set is empty");
  for (const auto& s : pre) check_symbol(s);
  check_symbol(post);
  if (pre.count(post) != 0) throw InvalidArgument("argument concludes one of its premises");
  if (weight < 1) throw InvalidArgument("argument weight must be positive");
  return Argument{std::move(pre), std::move(post), weight};
}

bool attacks(const Argument& a, const Argument& b) {
  return a.pre == b.pre && a.post != b.post;
}

bool supports(const Argument& a, const Argument& b) {
  return b.pre.count(a.post) != 0;
}

void ArgumentationModel::upsert(const Argument& argument) {
  const Argument checked = make_argument(argument.pre, argument.post, argument.weight);
  weights_[{checked.pre, checked.post}] += checked.weight;
}

void ArgumentationModel::add_category(const Symbol& category) {
  check_symbol(category);
  categories_.insert(category);
}

std::vector<Argument> ArgumentationModel::arguments() const {
  std::vector<Argument> out;
  out.reserve(weights_.size());
  for (const auto& [key, w] : weights_) out.push_back(Argument{key.first, key.second, w});
  return out;
}

std::int64_t ArgumentationModel::weight(const SymbolSet& pre, const Symbol& post) const {
  auto it = weights_.find({pre, post});
  return it == weights_.end() ? 0 : it->second;
}

void train(ArgumentationModel& model, const SymbolSet& parts, const Symbol& category,
           const AblOptions& options) {
  if (parts.empty()) throw InvalidArgument("training example has no part labels");
  if (options.max_subset < 1) throw InvalidArgument("max subset size must be positive");
  const std::vector<Symbol> items(parts.begin(), parts.end());
  const std::size_t limit = std::min<std::size_t>(items.size(), options.max_subset);

  model.add_category(category);
  // Enumerate subsets by size via index combinations.
  for (std::size_t size = 1; size <= limit; ++size) {
    std::vector<std::size_t> idx(size);
    for (std::size_t i = 0; i < size; ++i) idx[i] = i;
    while (true) {
      SymbolSet pre;
      for (auto i : idx) pre.insert(items[i]);
      if (pre.count(category) == 0) model.upsert(Argument{std::move(pre), category, 1});
      std::size_t pos = size;
      while (pos > 0 && idx[pos - 1] == items.size() - size + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t i = pos; i < size; ++i) idx[i] = idx[i - 1] + 1;
    }
  }
}

Explanation predict(const ArgumentationModel& model, const SymbolSet& parts) {
  if (model.categories().empty()) throw InvalidArgument("model knows no categories");
  const std::vector<Argument> all = model.arguments();
  const SymbolSet& categories = model.categories();

  // Forward-chain intermediate conclusions (posts that are not categories).
  SymbolSet facts = parts;
  std::map<Symbol, Argument> derived_by;
  for (std::size_t round = 0; round <= all.size(); ++round) {
    bool grew = false;
    for (const auto& arg : surviving(all, facts)) {
      if (categories.count(arg.post) != 0 || facts.count(arg.post) != 0) continue;
      auto it = derived_by.find(arg.post);
      if (it == derived_by.end()) {
        derived_by.emplace(arg.post, arg);
      } else if (stronger(arg, it->second)) {
        it->second = arg;
      }
    }
    for (const auto& [symbol, arg] : derived_by) {
      grew |= facts.insert(symbol).second;
    }
    if (!grew) break;
  }

  std::vector<Argument> finals;
  std::map<Symbol, std::int64_t> category_total;
  for (auto& arg : surviving(all, facts)) {
    if (categories.count(arg.post) == 0) continue;
    category_total[arg.post] += arg.weight;
    finals.push_back(std::move(arg));
  }
  if (finals.empty()) throw UnknownObject();

  const Argument* winner = &finals.front();
  for (const auto& arg : finals) {
    const auto key = [&](const Argument& a) {
      return std::tuple(a.pre.size(), a.weight, category_total[a.post]);
    };
    if (key(arg) > key(*winner) || (key(arg) == key(*winner) && arg.post < winner->post)) {
      winner = &arg;
    }
  }

  // Support chain: follow the most strongly derived premise back to observed
  // parts, then conclude with the winner.
  Explanation out;
  out.predicted = winner->post;
  std::vector<Argument> reversed{*winner};
  SymbolSet visited;
  const Argument* current = winner;
  while (true) {
    const Argument* next = nullptr;
    for (const auto& s : current->pre) {
      auto it = derived_by.find(s);
      if (it == derived_by.end() || parts.count(s) != 0 || visited.count(s) != 0) continue;
      if (next == nullptr || stronger(it->second, *next)) next = &it->second;
    }
    if (next == nullptr) break;
    visited.insert(next->post);
    reversed.push_back(*next);
    current = next;
  }
  out.chain.assign(reversed.rbegin(), reversed.rend());
  return out;
}

std::string explain(const Explanation& explanation) {
  std::string out;
  for (const auto& arg : explanation.chain) {
    out += join(arg.pre);
    out += " → ";
    out += arg.post;
    out += '\n';
  }
  return out;
}

std::string format_argument(const Argument& argument) {
  return join(argument.pre) + " -> " + argument.post + " : " + std::to_string(argument.weight);
}

Argument parse_argument(std::string_view line) {
  const auto arrow = line.find("->");
  const auto colon = line.rfind(':');
  if (arrow == std::string_view::npos || colon == std::string_view::npos || colon < arrow) {
    throw ParseError("expected 'pre1,pre2 -> post : weight', got '" + std::string(line) + "'");
  }
  SymbolSet pre;
  for (auto piece : detail::split(detail::trim(line.substr(0, arrow)), ',')) {
    pre.insert(std::string(detail::trim(piece)));
  }
  const std::string post(detail::trim(line.substr(arrow + 2, colon - arrow - 2)));
  const auto weight = detail::parse_int<std::int64_t>(detail::trim(line.substr(colon + 1)));
  if (!weight) throw ParseError("bad argument weight in '" + std::string(line) + "'");
  try {
    return make_argument(std::move(pre), post, *weight);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string(e.what()) + " in '" + std::string(line) + "'");
  }
}

void write_arguments(std::ostream& out, const ArgumentationModel& model) {
  out << "# categories: " << join(model.categories()) << '\n';
  for (const auto& arg : model.arguments()) out << format_argument(arg) << '\n';
}

void read_arguments(std::istream& in, ArgumentationModel& model, const std::string& source) {
  constexpr std::string_view header = "# categories:";
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<Argument> parsed;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.substr(0, header.size()) == header) {
      have_header = true;
      const auto rest = detail::trim(t.substr(header.size()));
      if (rest.empty()) continue;
      for (auto c : detail::split(rest, ',')) {
        try {
          model.add_category(std::string(detail::trim(c)));
        } catch (const InvalidArgument& e) {
          throw ParseError(source + ":" + std::to_string(line_no) + ": " + e.what());
        }
      }
      continue;
    }
    if (t.front() == '#') continue;
    try {
      parsed.push_back(parse_argument(t));
    } catch (const ParseError& e) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (const auto& arg : parsed) {
    model.upsert(arg);
    if (!have_header) model.add_category(arg.post);
  }
}

void save_arguments(const std::filesystem::path& path, const ArgumentationModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_arguments(out, model);
  if (!out) throw IoError("write failed for " + path.string());
}

ArgumentationModel load_arguments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open argument store " + path.string());
  ArgumentationModel model;
  read_arguments(in, model, path.string());
  return model;
}

}  // namespace partseg
