#include <gtest/gtest.h>

#include "critscene/scenario.hpp"
#include "critscene/xml.hpp"

namespace critscene::xml {
namespace {

constexpr const char* kXsd = R"(<?xml version="1.0"?>
<xs:schema xmlns:xs="http://www.w3.org/2001/XMLSchema">
  <xs:simpleType name="Color">
    <xs:restriction base="xs:string">
      <xs:enumeration value="red"/>
      <xs:enumeration value="blue"/>
    </xs:restriction>
  </xs:simpleType>
  <xs:complexType name="Item">
    <xs:attribute name="size" type="xs:double" use="required"/>
    <xs:attribute name="color" type="Color"/>
  </xs:complexType>
  <xs:complexType name="Box">
    <xs:sequence>
      <xs:element name="Label" type="Item" minOccurs="0"/>
      <xs:choice maxOccurs="unbounded">
        <xs:element name="Item" type="Item"/>
        <xs:element name="Box" type="Box"/>
      </xs:choice>
    </xs:sequence>
    <xs:attribute name="count" type="xs:unsignedInt"/>
  </xs:complexType>
  <xs:element name="Box" type="Box"/>
</xs:schema>)";

TEST(Xml, ParseWriteRoundTrip) {
  const std::string doc =
      "<?xml version=\"1.0\"?>\n<!-- c --><a x=\"1 &amp; 2\"><b/><c y='q'>t&lt;<![CDATA[<raw>]]></c></a>";
  const Element root = parse(doc);
  EXPECT_EQ(root.name, "a");
  ASSERT_EQ(root.children.size(), 2u);
  EXPECT_EQ(*root.find_attr("x"), "1 & 2");
  EXPECT_EQ(root.children[1].text, "t<<raw>");
  const std::string out = write(root);
  EXPECT_EQ(out.rfind("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n", 0), 0u);
  EXPECT_EQ(write(parse(out)), out);
}

TEST(Xml, WriterIndentsAndSelfCloses) {
  Element a("Root");
  a.attr("k", "v\"");
  a.add(Element("Leaf"));
  a.back().attr("n", "1");
  EXPECT_EQ(write(a),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<Root k=\"v&quot;\">\n  <Leaf n=\"1\"/>\n</Root>\n");
  EXPECT_EQ(escape("<&>'\""), "&lt;&amp;&gt;&apos;&quot;");
}

TEST(Xml, RejectsMalformed) {
  EXPECT_THROW(parse("<a><b></a>"), XmlError);
  EXPECT_THROW(parse("<a x=1/>"), XmlError);
  EXPECT_THROW(parse("<!DOCTYPE a><a/>"), XmlError);
  EXPECT_THROW(parse("<a/><b/>"), XmlError);
  EXPECT_THROW(parse("<a>&bogus;</a>"), XmlError);
  EXPECT_THROW(parse(""), XmlError);
}

TEST(Schema, AcceptsConformingDocuments) {
  const Schema s = Schema::parse(kXsd);
  EXPECT_TRUE(s.validate(parse(R"(<Box count="2"><Label size="1"/><Item size="2.5" color="red"/><Box><Item size="1e3"/></Box></Box>)")).empty());
}

TEST(Schema, ReportsViolations) {
  const Schema s = Schema::parse(kXsd);
  EXPECT_FALSE(s.validate(parse(R"(<Box/>)")).empty());                                  // choice needs one
  EXPECT_FALSE(s.validate(parse(R"(<Box><Item/></Box>)")).empty());                      // required attr
  EXPECT_FALSE(s.validate(parse(R"(<Box><Item size="x"/></Box>)")).empty());             // bad double
  EXPECT_FALSE(s.validate(parse(R"(<Box><Item size="1" color="green"/></Box>)")).empty()); // enum
  EXPECT_FALSE(s.validate(parse(R"(<Box><Item size="1" extra="1"/></Box>)")).empty());   // undeclared
  EXPECT_FALSE(s.validate(parse(R"(<Box count="-1"><Item size="1"/></Box>)")).empty());   // unsigned
  EXPECT_FALSE(s.validate(parse(R"(<Box><Item size="1"/><Label size="1"/></Box>)")).empty()); // order
  EXPECT_FALSE(s.validate(parse(R"(<Box>text<Item size="1"/></Box>)")).empty());         // text
  EXPECT_FALSE(s.validate(parse(R"(<Crate/>)")).empty());                                 // root
}

TEST(Schema, BundledSchemaParses) {
  EXPECT_NO_THROW(Schema::parse(critscene::bundled_subset_xsd()));
  EXPECT_THROW(Schema::parse("<notaschema/>"), XmlError);
}

}  // namespace
}  // namespace critscene::xml
