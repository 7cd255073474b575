#include <gtest/gtest.h>

#include <random>

#include "sipwall/sip_parser.hpp"
#include "test_support.hpp"

using namespace sipwall;

namespace {

SipParser parser_with(std::initializer_list<const char*> paths) {
  SipParser p;
  for (const char* s : paths) p.register_field(parse_field_path(s));
  p.seal();
  return p;
}

SipParser full_parser() { return testsup::full_parser(); }

const std::string kInvite = testsup::sip_message(
    "INVITE sip:bob@b.example SIP/2.0",
    {{"Via", "SIP/2.0/UDP pc33.a.example;branch=z9hG4bK776asdhds"},
     {"Max-Forwards", "70"},
     {"To", "Bob <sip:bob@b.example>"},
     {"From", "<sip:alice@a.example>;tag=1928301774"},
     {"Call-ID", "a84b4c76e66710@pc33.a.example"},
     {"CSeq", "314159 INVITE"},
     {"Contact", "<sip:alice@pc33.a.example>"},
     {"Content-Length", "4"}},
    "v=0\n");

void check_offsets(std::string_view raw, const ParseTree& tree) {
  for (const auto& n : tree.nodes) {
    ASSERT_LE(n.start_offset, n.end_offset);
    ASSERT_LE(n.end_offset, raw.size());
    EXPECT_EQ(testsup::trim(raw.substr(n.start_offset, n.end_offset - n.start_offset)), n.value);
    if (n.parent) {
      const ParseNode* p = tree.find(*n.parent);
      ASSERT_NE(p, nullptr);
      EXPECT_GE(n.start_offset, p->start_offset);
      EXPECT_LE(n.end_offset, p->end_offset);
    }
  }
}

}  // namespace

TEST(FieldRegistration, IdempotentAndDistinct) {
  SipParser p;
  auto a = p.register_field(parse_field_path("FIELDS:sip.method"));
  EXPECT_EQ(a, 1u);
  EXPECT_EQ(p.register_field(parse_field_path("FIELDS:sip.method")), 1u);
  EXPECT_NE(p.register_field(parse_field_path("FIELDS:sip.from")), a);
}

TEST(FieldRegistration, UnknownField) {
  SipParser p;
  try {
    p.register_field(parse_field_path("FIELDS:sip.nosuchfield"));
    FAIL();
  } catch (const UnknownField& e) {
    EXPECT_NE(std::string(e.what()).find("unknown field"), std::string::npos);
  }
}

TEST(FieldRegistration, SealedRejectsNewPaths) {
  SipParser p = parser_with({"FIELDS:sip.method"});
  EXPECT_EQ(p.register_field(parse_field_path("FIELDS:sip.method")), 1u);
  EXPECT_THROW(p.register_field(parse_field_path("FIELDS:sip.from")), std::logic_error);
}

TEST(FieldRegistration, MessageHeadersAlias) {
  EXPECT_EQ(parse_field_path("MESSAGE_HEADERS:sip.from"), parse_field_path("FIELDS:sip.from"));
  EXPECT_EQ(parse_field_path("fields:SIP.From"), parse_field_path("FIELDS:sip.from"));
}

TEST(ParseMessage, Method) {
  auto p = parser_with({"FIELDS:sip.method"});
  auto tree = p.parse_message("INVITE sip:bob@b.example SIP/2.0\r\nCall-ID: abc\r\n\r\n");
  EXPECT_EQ(tree.value(CatalogField::method), "INVITE");
  EXPECT_EQ(tree.message_kind, MessageKind::request);
}

TEST(ParseMessage, FromAndTag) {
  auto p = parser_with({"FIELDS:sip.from", "FIELDS:sip.from.tag"});
  auto tree = p.parse_message(kInvite);
  EXPECT_EQ(tree.value(CatalogField::from), "<sip:alice@a.example>;tag=1928301774");
  EXPECT_EQ(tree.value(CatalogField::from_tag), "1928301774");
  const ParseNode* tag = tree.find(CatalogField::from_tag);
  ASSERT_NE(tag, nullptr);
  EXPECT_EQ(tag->parent, tree.find(CatalogField::from)->field_id);
}

TEST(ParseMessage, Garbage) {
  auto p = parser_with({"FIELDS:sip.method"});
  EXPECT_THROW(p.parse_message("GARBAGE\r\n\r\n"), MalformedMessage);
  EXPECT_THROW(p.parse_message(""), MalformedMessage);
  EXPECT_THROW(p.parse_message("INVITE sip:b SIP/3\r\n\r\n"), MalformedMessage);
  EXPECT_THROW(p.parse_message("SIP/2.0 99 Odd\r\n\r\n"), MalformedMessage);
  EXPECT_THROW(p.parse_message("INVITE sip:b SIP/2.0\r\nNoColonHere\r\n\r\n"), MalformedMessage);
  EXPECT_THROW(p.parse_message("INVITE sip:b SIP/2.0\r\n folded-first\r\n\r\n"), MalformedMessage);
}

TEST(ParseMessage, Response) {
  auto p = parser_with({"FIELDS:sip.status", "FIELDS:sip.cseq.method"});
  auto tree = p.parse_message("SIP/2.0 180 Ringing\r\nCSeq: 1 INVITE\r\n\r\n");
  EXPECT_EQ(tree.message_kind, MessageKind::response);
  EXPECT_EQ(tree.status_code, 180);
  EXPECT_EQ(tree.value(CatalogField::status), "180");
  EXPECT_EQ(tree.value(CatalogField::cseq_method), "INVITE");
}

TEST(ParseMessage, CompactFormsAndCase) {
  auto p = parser_with({"FIELDS:sip.from.tag", "FIELDS:sip.call_id", "FIELDS:sip.via.branch", "FIELDS:sip.to.addr"});
  auto tree = p.parse_message(
      "BYE sip:x@y SIP/2.0\r\nv: SIP/2.0/UDP h;branch=z9hG4bKaa\r\nf: <sip:a@h1>;tag=ff\r\n"
      "T: \"Bob\" <sip:bob@host.example:5070>\r\nI: cid\r\n\r\n");
  EXPECT_EQ(tree.value(CatalogField::from_tag), "ff");
  EXPECT_EQ(tree.value(CatalogField::call_id), "cid");
  EXPECT_EQ(tree.value(CatalogField::via_branch), "z9hG4bKaa");
  EXPECT_EQ(tree.value(CatalogField::to_addr), "host.example");
}

TEST(ParseMessage, FoldedHeader) {
  auto p = parser_with({"FIELDS:sip.user_agent"});
  std::string raw = "OPTIONS sip:x@y SIP/2.0\r\nUser-Agent: a\r\n  b\r\nCall-ID: c\r\n\r\n";
  auto tree = p.parse_message(raw);
  EXPECT_EQ(tree.value(CatalogField::user_agent), "a\r\n  b");
  check_offsets(raw, tree);
}

TEST(ParseMessage, TopmostViaOnly) {
  auto p = parser_with({"FIELDS:sip.via.branch"});
  auto tree = p.parse_message(
      "BYE sip:x@y SIP/2.0\r\nVia: SIP/2.0/UDP a;branch=first, SIP/2.0/UDP b;branch=second\r\n"
      "Via: SIP/2.0/UDP c;branch=third\r\n\r\n");
  EXPECT_EQ(tree.value(CatalogField::via_branch), "first");
}

TEST(ParseMessage, Body) {
  auto p = parser_with({"BODY:raw", "FIELDS:sip.content_length"});
  auto tree = p.parse_message(kInvite);
  EXPECT_EQ(tree.value(CatalogField::body_raw), "v=0");
  EXPECT_EQ(tree.value(CatalogField::content_length), "4");
}

TEST(DialogKey, Projection) {
  auto p = parser_with({"FIELDS:sip.call_id", "FIELDS:sip.from.tag", "FIELDS:sip.to.tag"});
  auto k = extract_dialog_key(p.parse_message("BYE sip:x SIP/2.0\r\nCall-ID: abc\r\nFrom: <sip:a>;tag=f1\r\nTo: <sip:b>;tag=t1\r\n\r\n"));
  ASSERT_TRUE(k);
  EXPECT_EQ(*k, (DialogKey{"abc", "f1", "t1"}));
  auto early = extract_dialog_key(p.parse_message("INVITE sip:x SIP/2.0\r\nCall-ID: abc\r\nFrom: <sip:a>;tag=f1\r\nTo: <sip:b>\r\n\r\n"));
  ASSERT_TRUE(early);
  EXPECT_EQ(*early, (DialogKey{"abc", "f1", ""}));
  EXPECT_FALSE(extract_dialog_key(p.parse_message("INVITE sip:x SIP/2.0\r\nFrom: <sip:a>;tag=f1\r\n\r\n")));
}

TEST(TransactionKey, Projection) {
  auto p = parser_with({"FIELDS:sip.via.branch", "FIELDS:sip.cseq.method"});
  auto req = extract_transaction_key(p.parse_message(
      "INVITE sip:x SIP/2.0\r\nVia: SIP/2.0/UDP h;branch=z9hG4bK776\r\nCSeq: 314159 INVITE\r\n\r\n"));
  ASSERT_TRUE(req);
  EXPECT_EQ(*req, (TransactionKey{"z9hG4bK776", "INVITE"}));
  auto resp = extract_transaction_key(p.parse_message(
      "SIP/2.0 200 OK\r\nVia: SIP/2.0/UDP h;branch=z9hG4bK776\r\nCSeq: 314159 INVITE\r\n\r\n"));
  EXPECT_EQ(resp, req);
  EXPECT_FALSE(extract_transaction_key(
      p.parse_message("INVITE sip:x SIP/2.0\r\nVia: SIP/2.0/UDP h;received=1.2.3.4\r\nCSeq: 1 INVITE\r\n\r\n")));
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_value("abc", 1024), "abc");
  std::string uri(1500, 'u');
  EXPECT_EQ(normalize_value(uri, 1024), uri.substr(0, 1024));
  EXPECT_EQ(normalize_value("", 1), "");
  EXPECT_EQ(normalize_value("ab\r\ncd", 3), "ab");
}

TEST(Properties, OffsetFidelityAndNesting) {
  auto p = full_parser();
  for (const auto& rec : generate_clean_calls(20, 7)) check_offsets(rec.payload, p.parse_message(rec.payload));
  for (const auto& rec : generate_bye_attack(20, 8)) check_offsets(rec.payload, p.parse_message(rec.payload));
  check_offsets(kInvite, p.parse_message(kInvite));
}

TEST(Properties, LazyParsingMonotone) {
  auto full = full_parser();
  auto narrow = parser_with({"FIELDS:sip.method"});
  auto mid = parser_with({"FIELDS:sip.method", "FIELDS:sip.from"});
  for (const auto& rec : generate_clean_calls(5, 3)) {
    auto a = narrow.parse_message(rec.payload);
    auto b = mid.parse_message(rec.payload);
    auto c = full.parse_message(rec.payload);
    EXPECT_EQ(a.header_values_parsed, 0u);
    EXPECT_EQ(b.header_values_parsed, 1u);
    EXPECT_LE(a.nodes.size(), b.nodes.size());
    EXPECT_LE(b.nodes.size(), c.nodes.size());
  }
}

TEST(Properties, Idempotent) {
  auto p = full_parser();
  for (const auto& rec : generate_bye_attack(3, 1)) EXPECT_EQ(p.parse_message(rec.payload), p.parse_message(rec.payload));
}
