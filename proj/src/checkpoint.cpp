#include "nmtadv/checkpoint.hpp"

#include "nmtadv/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

namespace nmtadv {

namespace {

constexpr std::string_view kMagic = "NMTADV-CKPT";

void put_f32(std::ostream& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(b, 4);
}

float get_f32(const unsigned char* b) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(std::string("checkpoint truncated: missing ") + what);
  return line;
}

std::string read_bytes(std::istream& in, std::size_t n, const std::string& what) {
  std::string buf(n, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("checkpoint truncated inside " + what);
  return buf;
}

long parse_long(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("checkpoint: bad integer for " + what + ": '" + s + "'");
  }
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("checkpoint: missing header key '" + key + "'");
  return it->second;
}

const std::set<std::string> kConfigKeys{"arch",  "vocab_size", "embed_dim", "hidden_dim", "layers",
                                        "heads", "max_len",    "tensors"};

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const ModelConfig& c = ckpt.model.config();
  out << kMagic << ' ' << kCheckpointVersion << '\n';
  out << "arch=" << to_string(c.arch) << '\n'
      << "vocab_size=" << c.vocab_size << '\n'
      << "embed_dim=" << c.embed_dim << '\n'
      << "hidden_dim=" << c.hidden_dim << '\n'
      << "layers=" << c.layers << '\n'
      << "heads=" << c.heads << '\n'
      << "max_len=" << c.max_len << '\n';
  for (const auto& [k, v] : ckpt.metadata) {
    if (kConfigKeys.contains(k) || k.find('=') != std::string::npos || k.find('\n') != std::string::npos ||
        v.find('\n') != std::string::npos)
      throw ContractViolation("checkpoint metadata key not storable: " + k);
    out << k << '=' << v << '\n';
  }
  const auto& entries = ckpt.model.params().entries();
  out << "tensors=" << entries.size() << "\n\n";
  for (const auto& [name, m] : entries) {
    out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.size(); ++i) put_f32(out, m.data()[i]);
  }
  std::ostringstream merges, vocab, words;
  ckpt.tokenizer.write_merges(merges);
  ckpt.tokenizer.write_vocab(vocab);
  for (const auto& w : ckpt.source_words) words << w << '\n';
  for (const auto& [name, body] : {std::pair<const char*, std::string>{"merges", merges.str()},
                                   {"vocab", vocab.str()},
                                   {"source_words", words.str()}}) {
    out << "blob " << name << ' ' << body.size() << '\n';
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
  }
  out << "END\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  const std::string first = read_line(in, "header");
  if (first.rfind(std::string(kMagic) + ' ', 0) != 0) throw FormatError("not a checkpoint: bad magic line '" + first + "'");
  const long version = parse_long(first.substr(kMagic.size() + 1), "version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (this build reads version " +
                      std::to_string(kCheckpointVersion) + ")");

  std::map<std::string, std::string> kv;
  for (std::string line = read_line(in, "header"); !line.empty(); line = read_line(in, "header")) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint: malformed header line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }

  ModelConfig c;
  c.arch = parse_architecture(require(kv, "arch"));
  c.vocab_size = static_cast<int>(parse_long(require(kv, "vocab_size"), "vocab_size"));
  c.embed_dim = static_cast<int>(parse_long(require(kv, "embed_dim"), "embed_dim"));
  c.hidden_dim = static_cast<int>(parse_long(require(kv, "hidden_dim"), "hidden_dim"));
  c.layers = static_cast<int>(parse_long(require(kv, "layers"), "layers"));
  c.heads = static_cast<int>(parse_long(require(kv, "heads"), "heads"));
  c.max_len = static_cast<int>(parse_long(require(kv, "max_len"), "max_len"));
  const long count = parse_long(require(kv, "tensors"), "tensors");

  ParamStore params;
  for (long t = 0; t < count; ++t) {
    std::istringstream head(read_line(in, "tensor header"));
    std::string tag, name;
    long rows = -1, cols = -1;
    head >> tag >> name >> rows >> cols;
    if (tag != "tensor" || name.empty() || rows <= 0 || cols <= 0 || rows * cols > (1L << 28))
      throw FormatError("checkpoint: malformed tensor header");
    const std::string raw = read_bytes(in, static_cast<std::size_t>(rows * cols) * 4, "tensor " + name);
    MatrixF m(rows, cols);
    const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_f32(bytes + 4 * i);
    params.add(name, std::move(m));
  }

  std::map<std::string, std::string> blobs;
  for (int b = 0; b < 3; ++b) {
    std::istringstream head(read_line(in, "blob header"));
    std::string tag, name;
    long size = -1;
    head >> tag >> name >> size;
    if (tag != "blob" || size < 0) throw FormatError("checkpoint: malformed blob header");
    blobs[name] = read_bytes(in, static_cast<std::size_t>(size), "blob " + name);
  }
  if (read_line(in, "END marker") != "END") throw FormatError("checkpoint: missing END marker");

  Checkpoint ckpt;
  ckpt.model = Seq2SeqModel(c, std::move(params));
  std::istringstream merges(blobs["merges"]), vocab(blobs["vocab"]), words(blobs["source_words"]);
  ckpt.tokenizer = Tokenizer::read(merges, vocab);
  if (static_cast<int>(ckpt.tokenizer.vocab().size()) != c.vocab_size)
    throw FormatError("checkpoint: tokenizer vocabulary size disagrees with the model");
  for (std::string w; std::getline(words, w);)
    if (!w.empty()) ckpt.source_words.insert(w);
  for (auto& [k, v] : kv)
    if (!kConfigKeys.contains(k)) ckpt.metadata.emplace(k, v);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  write_checkpoint(out, ckpt);
  if (!out) throw InputError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

std::string digest_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
  return out;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return digest_hex(bytes);
}

}  // namespace nmtadv
