#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace critscene::xml {

class XmlError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Element-only document tree. Attribute order is preserved as written.
struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<Element> children;
  std::string text;  // concatenated character data, whitespace included

  Element() = default;
  explicit Element(std::string n) : name(std::move(n)) {}

  Element& attr(std::string key, std::string value);
  Element& add(Element child);
  /// Last child appended by add().
  Element& back() { return children.back(); }

  const std::string* find_attr(std::string_view key) const;
};

/// Parses a document with an optional prolog, comments and CDATA. DTDs and
/// processing instructions other than the XML declaration are rejected.
Element parse(std::string_view text);

/// Serialises with a UTF-8 declaration, two-space indentation and
/// self-closing empty elements. Output depends only on the tree.
std::string write(const Element& root);

std::string escape(std::string_view s);

/// The schema subset understood here: global elements and named complex
/// types built from xs:sequence / xs:choice of xs:element (minOccurs,
/// maxOccurs), xs:attribute (use="required"), and named simple types that
/// restrict xs:string by enumeration. Built-in attribute types: xs:string,
/// xs:double, xs:unsignedShort, xs:unsignedInt, xs:boolean, xs:dateTime.
/// Validation is strict: undeclared attributes and non-blank text fail.
class Schema {
 public:
  static Schema parse(std::string_view xsd_text);

  /// Empty when the document conforms; otherwise one message per problem.
  std::vector<std::string> validate(const Element& root) const;

  struct Particle;
  struct ComplexType;
  struct SimpleType;
  struct AttributeDecl;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

}  // namespace critscene::xml
