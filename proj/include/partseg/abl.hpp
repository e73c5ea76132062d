#pragma once

// Argumentation-based online classifier over part labels.
//
// An argument `pre -> post` states that observing every symbol of `pre` is a
// reason for concluding `post`. Two arguments attack each other when they
// share `pre` but conclude differently; A supports B when A's conclusion is
// one of B's premises.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace partseg {

using Symbol = std::string;
using SymbolSet = std::set<Symbol>;

struct Argument {
  SymbolSet pre;
  Symbol post;
  std::int64_t weight = 1;

  friend bool operator==(const Argument&, const Argument&) = default;
};

/// Validates the argument invariants (non-empty pre, post not in pre,
/// positive weight, printable symbols) and returns it.
Argument make_argument(SymbolSet pre, Symbol post, std::int64_t weight = 1);

bool attacks(const Argument& a, const Argument& b);
bool supports(const Argument& a, const Argument& b);

struct AblOptions {
  /// Largest premise set generated from one training example.
  int max_subset = 2;
  friend bool operator==(const AblOptions&, const AblOptions&) = default;
};

class ArgumentationModel {
 public:
  /// Adds the argument, summing weights with an existing (pre, post) entry.
  void upsert(const Argument& argument);
  void add_category(const Symbol& category);

  /// Stored arguments ordered by (pre, post).
  std::vector<Argument> arguments() const;
  const SymbolSet& categories() const { return categories_; }
  std::size_t size() const { return weights_.size(); }
  bool empty() const { return weights_.empty(); }

  /// Weight of (pre, post), zero when absent.
  std::int64_t weight(const SymbolSet& pre, const Symbol& post) const;

  friend bool operator==(const ArgumentationModel&, const ArgumentationModel&) = default;

 private:
  std::map<std::pair<SymbolSet, Symbol>, std::int64_t> weights_;
  SymbolSet categories_;
};

/// Online update from one labelled example: every non-empty subset of
/// `parts` with at most `options.max_subset` elements becomes (or
/// strengthens) an argument for `category`.
void train(ArgumentationModel& model, const SymbolSet& parts, const Symbol& category,
           const AblOptions& options = {});

struct Explanation {
  std::vector<Argument> chain;  // support order; the last concludes `predicted`
  Symbol predicted;
};

/// Resolves attacks among the arguments applicable to `parts` and returns the
/// conclusion of the strongest surviving argument, preferring larger premise
/// sets, then larger weight, then the category with the larger total
/// surviving weight, then the lexicographically smaller category.
/// Throws UnknownObject when nothing applicable survives.
Explanation predict(const ArgumentationModel& model, const SymbolSet& parts);

/// One line per chain element: "pre1,pre2 → post".
std::string explain(const Explanation& explanation);

/// "pre1,pre2 -> post : weight"
std::string format_argument(const Argument& argument);
Argument parse_argument(std::string_view line);

void write_arguments(std::ostream& out, const ArgumentationModel& model);
/// Merges the arguments in `in` into `model`. A "# categories: a,b" header
/// names the categories; without one every post is taken as a category.
/// Other lines starting with '#' are comments.
void read_arguments(std::istream& in, ArgumentationModel& model,
                    const std::string& source = "<stream>");

void save_arguments(const std::filesystem::path& path, const ArgumentationModel& model);
ArgumentationModel load_arguments(const std::filesystem::path& path);

}  // namespace partseg
