#include "aml/ingest.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

namespace aml::ingest {

namespace {

constexpr std::array<std::string_view, kTxFieldCount> kStandardNames = {
    "client_id", "agency", "account", "timestamp", "amount",
    "direction", "service_code", "destination", "kind"};

std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "D") return Direction::Debit;
  if (s == "C") return Direction::Credit;
  return std::nullopt;
}

std::optional<Destination> parse_destination(std::string_view s) {
  if (s == "SB") return Destination::SameBank;
  if (s == "TED") return Destination::OtherBankTED;
  if (s == "DOC") return Destination::OtherBankDOC;
  if (s == "-") return Destination::None;
  return std::nullopt;
}

std::optional<TxKind> parse_kind(std::string_view s) {
  if (s == "ORD") return TxKind::Ordinary;
  if (s == "FEE") return TxKind::Fee;
  if (s == "COM") return TxKind::Commission;
  if (s == "INT") return TxKind::Interest;
  if (s == "TAX") return TxKind::Tax;
  return std::nullopt;
}

bool getline_stripped(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::string inflate_gzip(const std::string& compressed) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw IoError("zlib: inflateInit failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  std::string out;
  char buf[1 << 16];
  int rc = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IoError("zlib: corrupt gzip stream");
    }
    out.append(buf, sizeof buf - zs.avail_out);
    // concatenated gzip members
    if (rc == Z_STREAM_END && zs.avail_in > 0) {
      inflateReset(&zs);
      rc = Z_OK;
    }
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

std::string deflate_gzip(const std::string& raw) {
  z_stream zs{};
  // mtime is left zero in the gzip header, so output is reproducible
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw IoError("zlib: deflateInit failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(raw.data()));
  zs.avail_in = static_cast<uInt>(raw.size());
  std::string out;
  char buf[1 << 16];
  int rc = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = deflate(&zs, Z_FINISH);
    out.append(buf, sizeof buf - zs.avail_out);
  } while (rc == Z_OK);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw IoError("zlib: deflate failed");
  return out;
}

}  // namespace

TransactionSchema TransactionSchema::standard() {
  TransactionSchema s;
  for (std::size_t i = 0; i < kTxFieldCount; ++i) s.column_names[i] = std::string(kStandardNames[i]);
  return s;
}

std::string transaction_header() {
  std::string h;
  for (std::size_t i = 0; i < kTxFieldCount; ++i) {
    if (i) h += ';';
    h += kStandardNames[i];
  }
  return h;
}

std::string client_header() { return "client_id;kind;opened"; }

std::string_view to_code(Direction d) { return d == Direction::Debit ? "D" : "C"; }

std::string_view to_code(Destination d) {
  switch (d) {
    case Destination::SameBank: return "SB";
    case Destination::OtherBankTED: return "TED";
    case Destination::OtherBankDOC: return "DOC";
    case Destination::None: return "-";
  }
  return "-";
}

std::string_view to_code(TxKind k) {
  switch (k) {
    case TxKind::Ordinary: return "ORD";
    case TxKind::Fee: return "FEE";
    case TxKind::Commission: return "COM";
    case TxKind::Interest: return "INT";
    case TxKind::Tax: return "TAX";
  }
  return "ORD";
}

std::string format_transaction(const Transaction& tx) {
  std::string s;
  s.reserve(96);
  s += tx.key.client_id;
  s += ';';
  s += tx.key.agency;
  s += ';';
  s += tx.key.account;
  s += ';';
  s += format_timestamp(tx.timestamp);
  s += ';';
  s += tx.amount.to_string();
  s += ';';
  s += to_code(tx.direction);
  s += ';';
  s += std::to_string(tx.service_code);
  s += ';';
  s += to_code(tx.destination);
  s += ';';
  s += to_code(tx.kind);
  return s;
}

std::string format_client(const ClientRecord& c) {
  return c.client_id + ";" + (c.kind == ClientKind::SingularPerson ? "PF" : "PJ") + ";" +
         format_date(c.account_opened);
}

ParseResult<Transaction> parse_transactions(std::istream& source, const TransactionSchema& schema) {
  ParseResult<Transaction> result;
  std::string line;
  if (!getline_stripped(source, line)) {
    if (source.bad()) throw IoError("transaction source unreadable");
    return result;
  }

  auto header = split(line, schema.delimiter);
  std::array<std::size_t, kTxFieldCount> column{};
  for (std::size_t f = 0; f < kTxFieldCount; ++f) {
    const auto& want = schema.column_names[f];
    auto it = std::find_if(header.begin(), header.end(),
                           [&](std::string_view h) { return trim(h) == want; });
    if (want.empty() || it == header.end())
      throw ConfigError("schema maps a field to column '" + want + "' which the header lacks");
    column[f] = static_cast<std::size_t>(it - header.begin());
    for (std::size_t g = 0; g < f; ++g)
      if (column[g] == column[f])
        throw ConfigError("schema maps two fields to column '" + want + "'");
  }

  std::size_t lineno = 1;
  while (getline_stripped(source, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cols = split(line, schema.delimiter);
    auto fail = [&](std::string msg) { result.errors.push_back({lineno, std::move(msg)}); };
    if (cols.size() != header.size()) {
      fail("expected " + std::to_string(header.size()) + " columns, got " +
           std::to_string(cols.size()));
      continue;
    }
    auto col = [&](TxField f) { return trim(cols[column[static_cast<std::size_t>(f)]]); };

    Transaction tx;
    tx.key.client_id = std::string(col(TxField::ClientId));
    tx.key.agency = std::string(col(TxField::Agency));
    tx.key.account = std::string(col(TxField::Account));
    if (tx.key.client_id.empty() || tx.key.agency.empty() || tx.key.account.empty()) {
      fail("empty identifier");
      continue;
    }
    auto ts = parse_timestamp(col(TxField::Timestamp));
    if (!ts) {
      fail("bad timestamp");
      continue;
    }
    tx.timestamp = *ts;
    auto amount = Money::parse(col(TxField::Amount));
    if (!amount) {
      fail("bad amount");
      continue;
    }
    tx.amount = *amount;
    auto dir = parse_direction(col(TxField::Direction));
    if (!dir) {
      fail("bad direction");
      continue;
    }
    tx.direction = *dir;
    auto svc = parse_int(col(TxField::ServiceCode));
    if (!svc || *svc < 0 || *svc > 65535) {
      fail("bad service code");
      continue;
    }
    tx.service_code = static_cast<std::uint16_t>(*svc);
    auto dest = parse_destination(col(TxField::Destination));
    if (!dest) {
      fail("bad destination");
      continue;
    }
    tx.destination = *dest;
    auto kind = parse_kind(col(TxField::Kind));
    if (!kind) {
      fail("bad kind");
      continue;
    }
    tx.kind = *kind;
    result.records.push_back(std::move(tx));
  }
  if (source.bad()) throw IoError("transaction source unreadable");
  return result;
}

ParseResult<ClientRecord> parse_clients(std::istream& source) {
  ParseResult<ClientRecord> result;
  std::string line;
  if (!getline_stripped(source, line)) return result;
  auto header = split(line, ';');
  if (header.size() != 3 || trim(header[0]) != "client_id" || trim(header[1]) != "kind" ||
      trim(header[2]) != "opened")
    throw ConfigError("client registry header must be client_id;kind;opened");
  std::size_t lineno = 1;
  while (getline_stripped(source, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cols = split(line, ';');
    if (cols.size() != 3) {
      result.errors.push_back({lineno, "expected 3 columns"});
      continue;
    }
    ClientRecord c;
    c.client_id = std::string(trim(cols[0]));
    auto k = trim(cols[1]);
    if (k == "PF")
      c.kind = ClientKind::SingularPerson;
    else if (k == "PJ")
      c.kind = ClientKind::LegalEntity;
    else {
      result.errors.push_back({lineno, "bad client kind"});
      continue;
    }
    auto d = parse_date(trim(cols[2]));
    if (!d || c.client_id.empty()) {
      result.errors.push_back({lineno, "bad opening date or id"});
      continue;
    }
    c.account_opened = *d;
    result.records.push_back(std::move(c));
  }
  return result;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("cannot read " + path.string());
  if (raw.size() >= 2 && static_cast<unsigned char>(raw[0]) == 0x1f &&
      static_cast<unsigned char>(raw[1]) == 0x8b)
    return inflate_gzip(raw);
  return raw;
}

void write_text_file(const std::filesystem::path& path, const std::string& content, bool gzip) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  if (gzip) {
    auto z = deflate_gzip(content);
    out.write(z.data(), static_cast<std::streamsize>(z.size()));
  } else {
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

ParseResult<Transaction> load_transactions(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return parse_transactions(in);
}

ParseResult<ClientRecord> load_clients(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return parse_clients(in);
}

Registry make_registry(std::vector<ClientRecord> clients) {
  Registry r;
  r.reserve(clients.size());
  for (auto& c : clients) {
    auto id = c.client_id;
    r.insert_or_assign(std::move(id), std::move(c));
  }
  return r;
}

std::vector<Transaction> filter_relevant(std::vector<Transaction> txs) {
  std::erase_if(txs, [](const Transaction& t) { return t.kind != TxKind::Ordinary; });
  return txs;
}

Segmented segment_clients(std::vector<Transaction> txs, const Registry& registry) {
  Segmented out;
  for (std::size_t i = 0; i < txs.size(); ++i) {
    auto it = registry.find(txs[i].key.client_id);
    if (it == registry.end()) {
      out.unknown.push_back({i, txs[i].key.client_id});
      continue;
    }
    (it->second.kind == ClientKind::SingularPerson ? out.singular : out.entity)
        .push_back(std::move(txs[i]));
  }
  return out;
}

}  // namespace aml::ingest
