#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "qchain/topology.hpp"

namespace qchain {

namespace {

// Just enough XML for Topology Zoo GraphML: tags with attributes, text
// content, comments, declarations and CDATA-free documents.
struct Tag {
    std::string name;
    std::map<std::string, std::string> attrs;
    bool closing = false;
    bool self_closing = false;
};

class XmlScanner {
public:
    explicit XmlScanner(std::string_view text) : text_(text) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("graphml: " + what + " at line " +
                         std::to_string(line_));
    }

    // Scans to the next tag, collecting intervening text. Returns false at
    // end of input.
    bool next(Tag& tag, std::string& text) {
        text.clear();
        for (;;) {
            while (pos_ < text_.size() && text_[pos_] != '<') {
                if (text_[pos_] == '\n') ++line_;
                text.push_back(text_[pos_++]);
            }
            if (pos_ >= text_.size()) return false;
            if (starts_with("<!--")) {
                skip_until("-->");
                continue;
            }
            if (starts_with("<?")) {
                skip_until("?>");
                continue;
            }
            if (starts_with("<!")) {
                skip_until(">");
                continue;
            }
            parse_tag(tag);
            return true;
        }
    }

    static std::string unescape(const std::string& s) {
        std::string out;
        out.reserve(s.size());
        for (std::size_t i = 0; i < s.size();) {
            if (s[i] != '&') {
                out.push_back(s[i++]);
                continue;
            }
            const auto end = s.find(';', i);
            const std::string entity =
                end == std::string::npos ? "" : s.substr(i + 1, end - i - 1);
            if (entity == "amp") out.push_back('&');
            else if (entity == "lt") out.push_back('<');
            else if (entity == "gt") out.push_back('>');
            else if (entity == "quot") out.push_back('"');
            else if (entity == "apos") out.push_back('\'');
            else {
                out.push_back(s[i++]);
                continue;
            }
            i = end + 1;
        }
        return out;
    }

private:
    bool starts_with(std::string_view prefix) const {
        return text_.substr(pos_, prefix.size()) == prefix;
    }

    void skip_until(std::string_view sentinel) {
        const auto found = text_.find(sentinel, pos_);
        if (found == std::string_view::npos) fail("unterminated markup");
        for (std::size_t i = pos_; i < found; ++i)
            if (text_[i] == '\n') ++line_;
        pos_ = found + sentinel.size();
    }

    void parse_tag(Tag& tag) {
        tag = Tag{};
        ++pos_;  // consume '<'
        if (pos_ < text_.size() && text_[pos_] == '/') {
            tag.closing = true;
            ++pos_;
        }
        tag.name = scan_name();
        if (tag.name.empty()) fail("empty tag name");
        for (;;) {
            skip_space();
            if (pos_ >= text_.size()) fail("unterminated tag");
            if (text_[pos_] == '>') {
                ++pos_;
                return;
            }
            if (text_[pos_] == '/') {
                ++pos_;
                if (pos_ >= text_.size() || text_[pos_] != '>')
                    fail("malformed self-closing tag");
                ++pos_;
                tag.self_closing = true;
                return;
            }
            const std::string name = scan_name();
            if (name.empty()) fail("malformed attribute");
            skip_space();
            if (pos_ >= text_.size() || text_[pos_] != '=')
                fail("attribute without value");
            ++pos_;
            skip_space();
            if (pos_ >= text_.size() ||
                (text_[pos_] != '"' && text_[pos_] != '\''))
                fail("unquoted attribute value");
            const char quote = text_[pos_++];
            const auto end = text_.find(quote, pos_);
            if (end == std::string_view::npos) fail("unterminated attribute");
            std::string value(text_.substr(pos_, end - pos_));
            for (char c : value)
                if (c == '\n') ++line_;
            pos_ = end + 1;
            tag.attrs[name] = unescape(value);
        }
    }

    std::string scan_name() {
        std::string name;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                text_[pos_] == '_' || text_[pos_] == '-' || text_[pos_] == '.' ||
                text_[pos_] == ':'))
            name.push_back(text_[pos_++]);
        return name;
    }

    void skip_space() {
        while (pos_ < text_.size() &&
               std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

struct RawNode {
    std::string id;
    std::map<std::string, std::string> data;  // attr.name -> value
};

}  // namespace

NetworkGraph parse_graphml(std::string_view xml, double length_scale) {
    XmlScanner scanner(xml);
    std::map<std::string, std::string> key_names;  // key id -> attr.name
    std::vector<RawNode> raw_nodes;
    std::vector<std::pair<std::string, std::string>> raw_edges;

    Tag tag;
    std::string text;
    enum class In { top, node, edge } where = In::top;
    std::string open_data_key;
    std::string* data_sink = nullptr;
    RawNode current_node;
    bool seen_graphml = false;
    int depth = 0;

    while (scanner.next(tag, text)) {
        if (tag.closing && tag.name == "data") {
            if (data_sink) *data_sink = XmlScanner::unescape(text);
            data_sink = nullptr;
            --depth;
            continue;
        }
        // Any other tag interrupts a pending <data> capture.
        data_sink = nullptr;
        if (tag.closing) {
            if (tag.name == "node" && where == In::node) {
                raw_nodes.push_back(current_node);
                where = In::top;
            } else if (tag.name == "edge" && where == In::edge) {
                where = In::top;
            }
            --depth;
            continue;
        }
        if (!tag.self_closing) ++depth;
        if (tag.name == "graphml") seen_graphml = true;
        if (tag.name == "key") {
            const auto id = tag.attrs.find("id");
            const auto name = tag.attrs.find("attr.name");
            if (id != tag.attrs.end() && name != tag.attrs.end())
                key_names[id->second] = name->second;
        } else if (tag.name == "node") {
            if (where != In::top) scanner.fail("nested <node>");
            current_node = RawNode{};
            const auto id = tag.attrs.find("id");
            if (id == tag.attrs.end()) scanner.fail("<node> without id");
            current_node.id = id->second;
            if (tag.self_closing)
                raw_nodes.push_back(current_node);
            else
                where = In::node;
        } else if (tag.name == "edge") {
            const auto src = tag.attrs.find("source");
            const auto dst = tag.attrs.find("target");
            if (src == tag.attrs.end() || dst == tag.attrs.end())
                scanner.fail("<edge> without source/target");
            raw_edges.emplace_back(src->second, dst->second);
            if (!tag.self_closing) where = In::edge;
        } else if (tag.name == "data" && !tag.self_closing) {
            const auto key = tag.attrs.find("key");
            if (key != tag.attrs.end() && where == In::node) {
                const auto name = key_names.find(key->second);
                if (name != key_names.end()) {
                    open_data_key = name->second;
                    data_sink = &current_node.data[open_data_key];
                }
            }
        }
    }
    if (depth != 0) throw ParseError("graphml: unbalanced document");
    if (!seen_graphml) throw ParseError("graphml: not a GraphML document");
    if (raw_nodes.empty()) throw ParseError("graphml: no nodes");

    NetworkGraph graph;
    graph.nodes.reserve(raw_nodes.size());
    std::map<std::string, int> index;
    for (const RawNode& raw : raw_nodes) {
        if (index.count(raw.id)) throw ParseError("graphml: duplicate node id " + raw.id);
        GraphNode node;
        node.id = raw.id;
        const auto label = raw.data.find("label");
        node.label = label != raw.data.end() ? label->second : raw.id;
        const auto lat = raw.data.find("Latitude");
        const auto lon = raw.data.find("Longitude");
        try {
            if (lat != raw.data.end()) node.latitude = std::stod(lat->second);
            if (lon != raw.data.end()) node.longitude = std::stod(lon->second);
        } catch (const std::exception&) {
            throw ParseError("graphml: bad coordinate on node " + raw.id);
        }
        index[node.id] = static_cast<int>(graph.nodes.size());
        graph.nodes.push_back(std::move(node));
    }

    std::set<std::pair<int, int>> seen;
    for (const auto& [src, dst] : raw_edges) {
        const auto u = index.find(src);
        const auto v = index.find(dst);
        if (u == index.end() || v == index.end())
            throw ParseError("graphml: edge references unknown node " +
                             (u == index.end() ? src : dst));
        if (u->second == v->second) continue;  // self-loop
        const std::pair<int, int> key{std::min(u->second, v->second),
                                      std::max(u->second, v->second)};
        if (!seen.insert(key).second) continue;  // parallel edge
        const GraphNode& a = graph.nodes[key.first];
        const GraphNode& b = graph.nodes[key.second];
        if (!a.has_coords() || !b.has_coords()) {
            graph.unmeasured_edges.push_back(key);
            continue;
        }
        graph.edges.push_back(GraphEdge{
            key.first, key.second, derive_length_km(a, b) * length_scale});
    }
    return graph;
}

NetworkGraph load_graphml(const std::string& path, double length_scale) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("graphml: cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_graphml(buffer.str(), length_scale);
}

namespace {

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace

std::string to_graphml(const NetworkGraph& graph) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n"
        << "<graphml>\n"
        << "  <key attr.name=\"label\" attr.type=\"string\" for=\"node\" id=\"d0\"/>\n"
        << "  <key attr.name=\"Latitude\" attr.type=\"double\" for=\"node\" id=\"d1\"/>\n"
        << "  <key attr.name=\"Longitude\" attr.type=\"double\" for=\"node\" id=\"d2\"/>\n"
        << "  <graph edgedefault=\"undirected\">\n";
    char buf[64];
    for (const GraphNode& node : graph.nodes) {
        out << "    <node id=\"" << escape(node.id) << "\">\n"
            << "      <data key=\"d0\">" << escape(node.label) << "</data>\n";
        if (node.latitude) {
            std::snprintf(buf, sizeof buf, "%.17g", *node.latitude);
            out << "      <data key=\"d1\">" << buf << "</data>\n";
        }
        if (node.longitude) {
            std::snprintf(buf, sizeof buf, "%.17g", *node.longitude);
            out << "      <data key=\"d2\">" << buf << "</data>\n";
        }
        out << "    </node>\n";
    }
    auto emit_edge = [&](int u, int v) {
        out << "    <edge source=\"" << escape(graph.nodes[u].id)
            << "\" target=\"" << escape(graph.nodes[v].id) << "\"/>\n";
    };
    for (const GraphEdge& edge : graph.edges) emit_edge(edge.u, edge.v);
    for (const auto& [u, v] : graph.unmeasured_edges) emit_edge(u, v);
    out << "  </graph>\n</graphml>\n";
    return out.str();
}

}  // namespace qchain
