#include "critscene/xml.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <regex>

namespace critscene::xml {

Element& Element::attr(std::string key, std::string value) {
  attributes.emplace_back(std::move(key), std::move(value));
  return *this;
}

Element& Element::add(Element child) {
  children.push_back(std::move(child));
  return *this;
}

const std::string* Element::find_attr(std::string_view key) const {
  for (const auto& [k, v] : attributes) {
    if (k == key) return &v;
  }
  return nullptr;
}

// ------------------------------------------------------------------- parser

namespace {

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  Element document() {
    skip_ws();
    if (starts("<?xml")) {
      const auto end = s_.find("?>", pos_);
      if (end == std::string_view::npos) fail("unterminated XML declaration");
      pos_ = end + 2;
    }
    skip_misc();
    if (starts("<!DOCTYPE")) fail("DTDs are not supported");
    Element root = element();
    skip_misc();
    if (pos_ != s_.size()) fail("content after the root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos_ && i < s_.size(); ++i) line += s_[i] == '\n';
    throw XmlError("line " + std::to_string(line) + ": " + msg);
  }

  bool starts(std::string_view p) const { return s_.substr(pos_, p.size()) == p; }
  bool eof() const { return pos_ >= s_.size(); }

  void skip_ws() {
    while (!eof() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r')) {
      ++pos_;
    }
  }

  void skip_comment() {
    const auto end = s_.find("-->", pos_ + 4);
    if (end == std::string_view::npos) fail("unterminated comment");
    pos_ = end + 3;
  }

  void skip_misc() {
    for (;;) {
      skip_ws();
      if (starts("<!--")) {
        skip_comment();
      } else if (starts("<?")) {
        fail("processing instructions are not supported");
      } else {
        return;
      }
    }
  }

  static bool name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' || c == '-' ||
           c == '.';
  }

  std::string name() {
    const std::size_t start = pos_;
    while (!eof() && name_char(s_[pos_])) ++pos_;
    if (start == pos_) fail("expected a name");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string decode(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out += raw[i];
        continue;
      }
      const auto semi = raw.find(';', i);
      if (semi == std::string_view::npos) fail("unterminated entity reference");
      const auto ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "amp") out += '&';
      else if (ent == "lt") out += '<';
      else if (ent == "gt") out += '>';
      else if (ent == "quot") out += '"';
      else if (ent == "apos") out += '\'';
      else if (!ent.empty() && ent[0] == '#') {
        unsigned long code = 0;
        const bool hex = ent.size() > 1 && ent[1] == 'x';
        const auto digits = ent.substr(hex ? 2 : 1);
        const auto [p, ec] =
            std::from_chars(digits.data(), digits.data() + digits.size(), code, hex ? 16 : 10);
        if (ec != std::errc{} || p != digits.data() + digits.size() || code > 0x7f) {
          fail("unsupported character reference &" + std::string(ent) + ";");
        }
        out += static_cast<char>(code);
      } else {
        fail("unknown entity &" + std::string(ent) + ";");
      }
      i = semi;
    }
    return out;
  }

  Element element() {
    if (eof() || s_[pos_] != '<') fail("expected '<'");
    ++pos_;
    Element e(name());
    for (;;) {
      skip_ws();
      if (eof()) fail("unterminated start tag <" + e.name + ">");
      if (starts("/>")) {
        pos_ += 2;
        return e;
      }
      if (s_[pos_] == '>') {
        ++pos_;
        break;
      }
      std::string key = name();
      skip_ws();
      if (eof() || s_[pos_] != '=') fail("expected '=' after attribute " + key);
      ++pos_;
      skip_ws();
      if (eof() || (s_[pos_] != '"' && s_[pos_] != '\'')) fail("expected quoted attribute value");
      const char q = s_[pos_++];
      const auto end = s_.find(q, pos_);
      if (end == std::string_view::npos) fail("unterminated attribute value");
      if (e.find_attr(key)) fail("duplicate attribute " + key);
      e.attributes.emplace_back(std::move(key), decode(s_.substr(pos_, end - pos_)));
      pos_ = end + 1;
    }
    // content
    for (;;) {
      if (eof()) fail("missing end tag </" + e.name + ">");
      if (starts("</")) {
        pos_ += 2;
        const std::string closing = name();
        if (closing != e.name) fail("mismatched end tag </" + closing + "> for <" + e.name + ">");
        skip_ws();
        if (eof() || s_[pos_] != '>') fail("expected '>'");
        ++pos_;
        return e;
      }
      if (starts("<!--")) {
        skip_comment();
      } else if (starts("<![CDATA[")) {
        const auto end = s_.find("]]>", pos_);
        if (end == std::string_view::npos) fail("unterminated CDATA section");
        e.text += s_.substr(pos_ + 9, end - pos_ - 9);
        pos_ = end + 3;
      } else if (starts("<?")) {
        fail("processing instructions are not supported");
      } else if (s_[pos_] == '<') {
        e.children.push_back(element());
      } else {
        const auto end = s_.find('<', pos_);
        const auto stop = end == std::string_view::npos ? s_.size() : end;
        e.text += decode(s_.substr(pos_, stop - pos_));
        pos_ = stop;
      }
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

void write_element(std::string& out, const Element& e, int depth) {
  out.append(static_cast<std::size_t>(depth) * 2, ' ');
  out += '<';
  out += e.name;
  for (const auto& [k, v] : e.attributes) {
    out += ' ';
    out += k;
    out += "=\"";
    out += escape(v);
    out += '"';
  }
  if (e.children.empty() && e.text.empty()) {
    out += "/>\n";
    return;
  }
  out += '>';
  if (e.children.empty()) {
    out += escape(e.text);
  } else {
    out += '\n';
    for (const auto& c : e.children) write_element(out, c, depth + 1);
    out.append(static_cast<std::size_t>(depth) * 2, ' ');
  }
  out += "</";
  out += e.name;
  out += ">\n";
}

}  // namespace

Element parse(std::string_view text) { return Parser(text).document(); }

std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string write(const Element& root) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  write_element(out, root, 0);
  return out;
}

// ------------------------------------------------------------------- schema

struct Schema::AttributeDecl {
  std::string name;
  std::string type;
  bool required = false;
};

struct Schema::Particle {
  enum class Kind { Element, Sequence, Choice } kind = Kind::Element;
  std::string name;  // element particles
  std::string type;  // element particles
  std::size_t min_occurs = 1;
  std::size_t max_occurs = 1;  // SIZE_MAX for unbounded
  std::vector<Particle> items;  // group particles
};

struct Schema::ComplexType {
  std::optional<Particle> content;
  std::vector<AttributeDecl> attributes;
};

struct Schema::SimpleType {
  std::vector<std::string> enumeration;
};

struct Schema::Impl {
  std::map<std::string, ComplexType> complex;
  std::map<std::string, SimpleType> simple;
  std::map<std::string, std::string> globals;  // element name -> type
};

namespace {

std::size_t occurs(const Element& e, const char* key, std::size_t fallback) {
  const auto* v = e.find_attr(key);
  if (!v) return fallback;
  if (*v == "unbounded") return std::numeric_limits<std::size_t>::max();
  std::size_t n = 0;
  const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), n);
  if (ec != std::errc{} || p != v->data() + v->size()) {
    throw XmlError("schema: bad " + std::string(key) + " '" + *v + "'");
  }
  return n;
}

const std::string& required_attr(const Element& e, const char* key) {
  const auto* v = e.find_attr(key);
  if (!v) throw XmlError("schema: <" + e.name + "> lacks '" + key + "'");
  return *v;
}

}  // namespace

namespace {

Schema::Particle parse_particle(const Element& e) {
  Schema::Particle p;
  if (e.name == "xs:element") {
    p.kind = Schema::Particle::Kind::Element;
    p.name = required_attr(e, "name");
    p.type = required_attr(e, "type");
  } else if (e.name == "xs:sequence" || e.name == "xs:choice") {
    p.kind = e.name == "xs:sequence" ? Schema::Particle::Kind::Sequence
                                     : Schema::Particle::Kind::Choice;
    for (const auto& c : e.children) p.items.push_back(parse_particle(c));
  } else {
    throw XmlError("schema: unsupported particle <" + e.name + ">");
  }
  p.min_occurs = occurs(e, "minOccurs", 1);
  p.max_occurs = occurs(e, "maxOccurs", 1);
  if (p.max_occurs < p.min_occurs) throw XmlError("schema: maxOccurs < minOccurs");
  return p;
}

bool is_builtin(std::string_view t) {
  return t == "xs:string" || t == "xs:double" || t == "xs:unsignedShort" ||
         t == "xs:unsignedInt" || t == "xs:boolean" || t == "xs:dateTime";
}

bool valid_builtin(std::string_view t, const std::string& v) {
  if (t == "xs:string") return true;
  if (t == "xs:boolean") return v == "true" || v == "false" || v == "1" || v == "0";
  if (t == "xs:double") {
    static const std::regex re(R"([+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?|INF|-INF|NaN)");
    return std::regex_match(v, re);
  }
  if (t == "xs:unsignedShort" || t == "xs:unsignedInt") {
    if (v.empty() || v.size() > 10) return false;
    for (char c : v) {
      if (c < '0' || c > '9') return false;
    }
    const unsigned long long n = std::strtoull(v.c_str(), nullptr, 10);
    return n <= (t == "xs:unsignedShort" ? 65535ULL : 4294967295ULL);
  }
  if (t == "xs:dateTime") {
    static const std::regex re(
        R"(-?\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?(Z|[+-]\d{2}:\d{2})?)");
    return std::regex_match(v, re);
  }
  return false;
}

}  // namespace

Schema Schema::parse(std::string_view xsd_text) {
  const Element root = xml::parse(xsd_text);
  if (root.name != "xs:schema") throw XmlError("schema: root must be xs:schema");
  auto impl = std::make_shared<Impl>();
  for (const auto& def : root.children) {
    if (def.name == "xs:simpleType") {
      SimpleType st;
      if (def.children.size() != 1 || def.children[0].name != "xs:restriction" ||
          required_attr(def.children[0], "base") != "xs:string") {
        throw XmlError("schema: simple types must restrict xs:string");
      }
      for (const auto& en : def.children[0].children) {
        if (en.name != "xs:enumeration") throw XmlError("schema: only enumerations are supported");
        st.enumeration.push_back(required_attr(en, "value"));
      }
      impl->simple[required_attr(def, "name")] = std::move(st);
    } else if (def.name == "xs:complexType") {
      ComplexType ct;
      for (const auto& c : def.children) {
        if (c.name == "xs:attribute") {
          AttributeDecl a;
          a.name = required_attr(c, "name");
          a.type = required_attr(c, "type");
          const auto* use = c.find_attr("use");
          a.required = use && *use == "required";
          ct.attributes.push_back(std::move(a));
        } else {
          if (ct.content) throw XmlError("schema: complex type with two content models");
          ct.content = parse_particle(c);
        }
      }
      impl->complex[required_attr(def, "name")] = std::move(ct);
    } else if (def.name == "xs:element") {
      impl->globals[required_attr(def, "name")] = required_attr(def, "type");
    } else {
      throw XmlError("schema: unsupported top-level <" + def.name + ">");
    }
  }
  // Every referenced type must resolve.
  const auto known = [&](const std::string& t) {
    return impl->complex.count(t) || impl->simple.count(t) || is_builtin(t);
  };
  for (const auto& [n, t] : impl->globals) {
    if (!impl->complex.count(t)) throw XmlError("schema: element " + n + " has unknown type " + t);
  }
  for (const auto& [n, ct] : impl->complex) {
    for (const auto& a : ct.attributes) {
      if (!known(a.type) || impl->complex.count(a.type)) {
        throw XmlError("schema: attribute " + n + "@" + a.name + " has unknown type " + a.type);
      }
    }
    std::vector<const Particle*> stack;
    if (ct.content) stack.push_back(&*ct.content);
    while (!stack.empty()) {
      const Particle* p = stack.back();
      stack.pop_back();
      if (p->kind == Particle::Kind::Element && !impl->complex.count(p->type)) {
        throw XmlError("schema: element " + p->name + " has unknown complex type " + p->type);
      }
      for (const auto& i : p->items) stack.push_back(&i);
    }
  }
  Schema s;
  s.impl_ = std::move(impl);
  return s;
}

namespace {

struct Validator {
  const std::map<std::string, Schema::ComplexType>& complex;
  const std::map<std::string, Schema::SimpleType>& simple;
  std::vector<std::string>& errors;

  // Matches `p` against children[from..] and returns every reachable end
  // position, so both choice branches and occurrence counts can backtrack.
  std::vector<std::size_t> match(const Schema::Particle& p, const std::vector<Element>& kids,
                                 std::size_t from) const {
    std::vector<std::size_t> frontier = {from};
    std::vector<std::size_t> out;
    if (p.min_occurs == 0) out.push_back(from);
    for (std::size_t n = 1; n <= p.max_occurs && !frontier.empty(); ++n) {
      std::vector<std::size_t> next;
      for (std::size_t f : frontier) {
        for (std::size_t e : match_once(p, kids, f)) {
          if (e == f) continue;  // no progress: avoid looping on empty matches
          if (std::find(next.begin(), next.end(), e) == next.end()) next.push_back(e);
        }
      }
      if (n >= p.min_occurs) {
        for (std::size_t e : next) {
          if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
        }
      }
      frontier = std::move(next);
    }
    return out;
  }

  std::vector<std::size_t> match_once(const Schema::Particle& p, const std::vector<Element>& kids,
                                      std::size_t from) const {
    using K = Schema::Particle::Kind;
    switch (p.kind) {
      case K::Element:
        if (from < kids.size() && kids[from].name == p.name) return {from + 1};
        return {};
      case K::Choice: {
        std::vector<std::size_t> out;
        for (const auto& item : p.items) {
          for (std::size_t e : match(item, kids, from)) {
            if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
          }
        }
        return out;
      }
      case K::Sequence: {
        std::vector<std::size_t> cur = {from};
        for (const auto& item : p.items) {
          std::vector<std::size_t> next;
          for (std::size_t c : cur) {
            for (std::size_t e : match(item, kids, c)) {
              if (std::find(next.begin(), next.end(), e) == next.end()) next.push_back(e);
            }
          }
          cur = std::move(next);
          if (cur.empty()) break;
        }
        return cur;
      }
    }
    return {};
  }

  // Child element name -> declared type, collected from the content model.
  static void declared(const Schema::Particle& p, std::map<std::string, std::string>& out) {
    if (p.kind == Schema::Particle::Kind::Element) out.emplace(p.name, p.type);
    for (const auto& i : p.items) declared(i, out);
  }

  void check(const Element& e, const std::string& type, const std::string& path) const {
    const auto& ct = complex.at(type);
    for (const auto& [k, v] : e.attributes) {
      const auto it = std::find_if(ct.attributes.begin(), ct.attributes.end(),
                                   [&](const auto& a) { return a.name == k; });
      if (it == ct.attributes.end()) {
        errors.push_back(path + ": undeclared attribute '" + k + "'");
        continue;
      }
      bool ok;
      if (const auto st = simple.find(it->type); st != simple.end()) {
        ok = std::find(st->second.enumeration.begin(), st->second.enumeration.end(), v) !=
             st->second.enumeration.end();
      } else {
        ok = valid_builtin(it->type, v);
      }
      if (!ok) errors.push_back(path + ": attribute " + k + "='" + v + "' is not a valid " + it->type);
    }
    for (const auto& a : ct.attributes) {
      if (a.required && !e.find_attr(a.name)) {
        errors.push_back(path + ": missing required attribute '" + a.name + "'");
      }
    }
    if (e.text.find_first_not_of(" \t\r\n") != std::string::npos) {
      errors.push_back(path + ": unexpected text content");
    }
    if (!ct.content) {
      if (!e.children.empty()) errors.push_back(path + ": element must be empty");
      return;
    }
    const auto ends = match(*ct.content, e.children, 0);
    if (std::find(ends.begin(), ends.end(), e.children.size()) == ends.end()) {
      std::string seen;
      for (const auto& c : e.children) seen += (seen.empty() ? "" : ", ") + c.name;
      errors.push_back(path + ": children [" + seen + "] do not match the content model of " + type);
      return;
    }
    std::map<std::string, std::string> types;
    declared(*ct.content, types);
    std::map<std::string, int> counts;
    for (const auto& c : e.children) {
      const int k = counts[c.name]++;
      check(c, types.at(c.name), path + "/" + c.name + "[" + std::to_string(k) + "]");
    }
  }
};

}  // namespace

std::vector<std::string> Schema::validate(const Element& root) const {
  std::vector<std::string> errors;
  const auto it = impl_->globals.find(root.name);
  if (it == impl_->globals.end()) {
    errors.push_back("root element <" + root.name + "> is not declared");
    return errors;
  }
  Validator v{impl_->complex, impl_->simple, errors};
  v.check(root, it->second, "/" + root.name);
  return errors;
}

}  // namespace critscene::xml
