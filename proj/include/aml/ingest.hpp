#pragma once

// Transaction and client-registry ingestion: parsing, relevance filtering and
// segmentation into singular persons and legal entities.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "aml/core.hpp"

namespace aml::ingest {

enum class Direction : std::uint8_t { Debit, Credit };
enum class Destination : std::uint8_t { None, SameBank, OtherBankTED, OtherBankDOC };
enum class TxKind : std::uint8_t { Ordinary, Fee, Commission, Interest, Tax };

struct Transaction {
  AccountKey key;
  Timestamp timestamp{};
  Money amount{};
  Direction direction = Direction::Debit;
  std::uint16_t service_code = 0;
  Destination destination = Destination::None;
  TxKind kind = TxKind::Ordinary;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct ClientRecord {
  std::string client_id;
  ClientKind kind = ClientKind::SingularPerson;
  Date account_opened{};

  friend bool operator==(const ClientRecord&, const ClientRecord&) = default;
};

using Registry = std::unordered_map<std::string, ClientRecord>;

struct ParseError {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string message;
};

template <typename T>
struct ParseResult {
  std::vector<T> records;
  std::vector<ParseError> errors;
};

/// Logical transaction fields, in canonical column order.
enum class TxField : std::uint8_t {
  ClientId, Agency, Account, Timestamp, Amount, Direction, ServiceCode, Destination, Kind
};
inline constexpr std::size_t kTxFieldCount = 9;

/// Maps each logical field to the header name of the column carrying it.
struct TransactionSchema {
  std::array<std::string, kTxFieldCount> column_names;
  char delimiter = ';';

  static TransactionSchema standard();
};

/// Header line for the canonical transaction file.
std::string transaction_header();
std::string client_header();

std::string format_transaction(const Transaction& tx);
std::string format_client(const ClientRecord& c);

/// Reads a header line and then one transaction per line. Malformed lines are
/// reported in `errors` and never abort the batch. Throws ConfigError when
/// the header cannot satisfy the schema mapping.
ParseResult<Transaction> parse_transactions(std::istream& source,
                                            const TransactionSchema& schema =
                                                TransactionSchema::standard());

ParseResult<ClientRecord> parse_clients(std::istream& source);

/// Loads a file, transparently inflating gzip content (detected by magic
/// bytes). Throws IoError.
std::string read_text_file(const std::filesystem::path& path);

/// Writes text, gzip-compressed when `gzip` is set. Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& content, bool gzip);

ParseResult<Transaction> load_transactions(const std::filesystem::path& path);
ParseResult<ClientRecord> load_clients(const std::filesystem::path& path);
Registry make_registry(std::vector<ClientRecord> clients);

/// Keeps Ordinary transactions, in input order.
std::vector<Transaction> filter_relevant(std::vector<Transaction> txs);

struct RoutingError {
  std::size_t index = 0;  // position in the input vector
  std::string client_id;
};

struct Segmented {
  std::vector<Transaction> singular;
  std::vector<Transaction> entity;
  std::vector<RoutingError> unknown;
};

/// Partitions transactions by the kind of their client. Transactions of
/// clients missing from the registry are dropped and reported.
Segmented segment_clients(std::vector<Transaction> txs, const Registry& registry);

std::string_view to_code(Direction d);
std::string_view to_code(Destination d);
std::string_view to_code(TxKind k);

}  // namespace aml::ingest
