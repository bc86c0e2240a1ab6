#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "molbench/chem/graph.hpp"

namespace molbench::chem {

class SelfiesError : public std::runtime_error {
 public:
  enum class Kind { UnknownToken, UnsupportedFeature, Empty };

  SelfiesError(Kind kind, std::size_t token, const std::string& message)
      : std::runtime_error(message), kind_(kind), token_(token) {}

  Kind kind() const { return kind_; }
  /// Token index for decode errors, atom index for encode errors.
  std::size_t position() const { return token_; }

 private:
  Kind kind_;
  std::size_t token_;
};

/// Pinned token table: index alphabet and bonding capacities.
class SelfiesAlphabet {
 public:
  /// Parses the text form of tokens_vN.txt.
  static SelfiesAlphabet parse(std::string_view text);
  /// The table compiled into the library.
  static const SelfiesAlphabet& bundled();

  int version() const { return version_; }
  const std::vector<std::string>& index_tokens() const { return index_; }
  /// Index digit for a token, or -1 if the token is not in the index alphabet.
  int index_of(std::string_view token) const;
  /// Maximum number of bond valence units an atom may carry (H included).
  int capacity(int atomic_number, int charge) const;

 private:
  int version_ = 0;
  std::vector<std::string> index_;
  std::map<std::pair<int, int>, int> capacity_;
  int default_capacity_ = 8;
};

/// Splits "[C][=C]." style strings into tokens ("." kept as its own token).
/// Throws UnknownToken for unbracketed text.
std::vector<std::string> tokenize_selfies(std::string_view text);

/// Encodes a graph. Aromatic systems are kekulized first; stereo marks are dropped.
std::string encode_selfies(const MolecularGraph& graph);

/// Decodes with the derivation rules: bond requests are clamped to the remaining
/// capacity so every result satisfies the valence table.
MolecularGraph decode_selfies(std::string_view text);

/// Alternating single/double assignment for aromatic bonds. Atoms lose their
/// aromatic flag; hydrogen counts are preserved (pinned as explicit H where the
/// Kekule valence would change them). Throws UnsupportedFeature when no perfect
/// matching exists.
MolecularGraph kekulize(const MolecularGraph& graph);

}  // namespace molbench::chem
