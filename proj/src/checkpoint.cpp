#include "partseg/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <vector>

#include "partseg/detail/text.hpp"
#include "partseg/error.hpp"

namespace partseg {

namespace {

constexpr std::string_view kMagic = "partseg-checkpoint 1";

void put_double(std::ostream& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

double get_double(std::istream& in, const std::string& source) {
  std::array<unsigned char, 8> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw ParseError(source + ": truncated checkpoint payload");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

struct PartHeader {
  PartId label = 0;
  std::int64_t t_updates = 0;
  std::int64_t doc_count = 0;
};

}  // namespace

void write_checkpoint(std::ostream& out, const PartRegistry& registry) {
  using detail::format_double;
  const auto& h = registry.hyper();
  out << kMagic << '\n'
      << "vocabulary " << registry.vocabulary() << '\n'
      << "gamma " << format_double(h.gamma) << '\n'
      << "alpha0 " << format_double(h.alpha0) << '\n'
      << "eta " << format_double(h.eta) << '\n'
      << "topics " << h.topics << '\n'
      << "tables " << h.tables << '\n'
      << "kappa " << format_double(h.kappa) << '\n'
      << "tau0 " << format_double(h.tau0) << '\n'
      << "batch_size " << h.batch_size << '\n'
      << "parts " << registry.size() << '\n';
  for (const auto& m : registry.models()) {
    out << "part " << m.label() << " t_updates " << m.t_updates() << " doc_count "
        << m.doc_count() << '\n';
  }
  out << "payload float64-le\nend\n";
  for (const auto& m : registry.models()) {
    for (Eigen::Index r = 0; r < m.lambda().rows(); ++r) {
      for (Eigen::Index c = 0; c < m.lambda().cols(); ++c) put_double(out, m.lambda()(r, c));
    }
    for (Eigen::Index k = 0; k < m.u().size(); ++k) put_double(out, m.u()[k]);
    for (Eigen::Index k = 0; k < m.v().size(); ++k) put_double(out, m.v()[k]);
  }
}

PartRegistry read_checkpoint(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw ParseError(source + ": not a partseg checkpoint");
  }
  std::map<std::string, std::string, std::less<>> fields;
  std::vector<PartHeader> parts;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    auto cols = detail::split_ws(line);
    if (cols.empty()) continue;
    if (cols[0] == "part") {
      if (cols.size() != 6 || cols[2] != "t_updates" || cols[4] != "doc_count") {
        throw ParseError(source + ": malformed part line '" + line + "'");
      }
      auto label = detail::parse_int<PartId>(cols[1]);
      auto t = detail::parse_int<std::int64_t>(cols[3]);
      auto d = detail::parse_int<std::int64_t>(cols[5]);
      if (!label || !t || !d) throw ParseError(source + ": malformed part line '" + line + "'");
      parts.push_back({*label, *t, *d});
    } else if (cols.size() == 2) {
      fields[std::string(cols[0])] = std::string(cols[1]);
    } else {
      throw ParseError(source + ": malformed manifest line '" + line + "'");
    }
  }
  if (!ended) throw ParseError(source + ": manifest has no end marker");

  auto field = [&](const char* key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw ParseError(source + ": manifest lacks '" + key + "'");
    return it->second;
  };
  auto real = [&](const char* key) {
    auto v = detail::parse_double(field(key));
    if (!v) throw ParseError(source + ": bad value for '" + key + "'");
    return *v;
  };
  auto integer = [&](const char* key) {
    auto v = detail::parse_int<long long>(field(key));
    if (!v) throw ParseError(source + ": bad value for '" + key + "'");
    return *v;
  };
  if (field("payload") != "float64-le") throw ParseError(source + ": unsupported payload");

  HdpHyperparams h;
  h.gamma = real("gamma");
  h.alpha0 = real("alpha0");
  h.eta = real("eta");
  h.topics = static_cast<int>(integer("topics"));
  h.tables = static_cast<int>(integer("tables"));
  h.kappa = real("kappa");
  h.tau0 = real("tau0");
  h.batch_size = static_cast<int>(integer("batch_size"));
  const auto vocabulary = static_cast<int>(integer("vocabulary"));
  if (integer("parts") != static_cast<long long>(parts.size())) {
    throw ParseError(source + ": part count does not match part lines");
  }

  try {
    PartRegistry registry(vocabulary, h);
    for (const auto& ph : parts) {
      Eigen::MatrixXd lambda(h.topics, vocabulary);
      for (Eigen::Index r = 0; r < lambda.rows(); ++r) {
        for (Eigen::Index c = 0; c < lambda.cols(); ++c) lambda(r, c) = get_double(in, source);
      }
      Eigen::VectorXd u(h.topics - 1);
      Eigen::VectorXd v(h.topics - 1);
      for (Eigen::Index k = 0; k < u.size(); ++k) u[k] = get_double(in, source);
      for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = get_double(in, source);
      registry.insert(LocalPartModel(ph.label, h, std::move(lambda), std::move(u), std::move(v),
                                     ph.t_updates, ph.doc_count));
    }
    if (in.peek() != std::char_traits<char>::eof()) {
      throw ParseError(source + ": trailing bytes after payload");
    }
    return registry;
  } catch (const InvalidArgument& e) {
    throw ParseError(source + ": " + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const PartRegistry& registry) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_checkpoint(out, registry);
  if (!out) throw IoError("write failed for " + path.string());
}

PartRegistry load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in, path.string());
}

}  // namespace partseg
