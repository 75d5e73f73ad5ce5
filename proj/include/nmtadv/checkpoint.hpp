#pragma once

// Checkpoint container:
//
//   NMTADV-CKPT <version>
//   key=value            (model config and free-form metadata)
//   ...
//   tensors=<count>
//   <blank line>
//   then per tensor:  "tensor <name> <rows> <cols>\n" + rows*cols float32 LE
//   then per blob:    "blob <name> <bytes>\n" + bytes
//   END\n

#include "nmtadv/models/seq2seq.hpp"
#include "nmtadv/tokenizer.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>

namespace nmtadv {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Seq2SeqModel model;
  Tokenizer tokenizer;
  std::set<std::string> source_words;  // V_unique of the source training corpus
  std::map<std::string, std::string> metadata;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a 64 over the file bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);
std::string digest_hex(std::string_view bytes);

}  // namespace nmtadv
