#include <fstream>
#include <sstream>

#include "greenwave/net.hpp"

namespace greenwave {

namespace {

std::vector<std::string> splitTokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
        if (tok[0] == '#') break; // trailing comment
        out.push_back(tok);
    }
    return out;
}

std::string ctx(const std::string& path, int lineNo, const std::string& field) {
    return path + ":" + std::to_string(lineNo) + " " + field;
}

void need(const std::vector<std::string>& tok, size_t n, const std::string& where) {
    if (tok.size() < n)
        throw ParseError(where + ": expected at least " + std::to_string(n - 1) + " fields, got " +
                         std::to_string(tok.size() - 1));
}

std::string readFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void writeFile(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    out << content;
}

} // namespace

RoadNetwork loadNetwork(const std::string& path) {
    std::istringstream in(readFile(path));
    RoadNetwork net;
    struct PendingLane { std::string edge; int index; double limit; int lineNo; };
    struct PendingConn { std::string fe; int fl; std::string te; int tl; int lineNo; };
    struct PendingDet { std::string id, edge; int lane; double pos, zone; std::string kind; int lineNo; };
    std::vector<PendingLane> pendingLanes;
    std::vector<PendingConn> pendingConns;
    std::vector<PendingDet> pendingDets;
    struct PendingLight { std::string id, node; int lineNo; };
    std::vector<PendingLight> pendingLights;

    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        auto tok = splitTokens(line);
        if (tok.empty()) continue;
        const std::string& tag = tok[0];
        if (tag == "NODE") {
            need(tok, 4, ctx(path, lineNo, "NODE"));
            Node n;
            n.id = tok[1];
            n.x = parseDouble(tok[2], ctx(path, lineNo, "NODE x"));
            n.y = parseDouble(tok[3], ctx(path, lineNo, "NODE y"));
            net.nodes.push_back(n);
        } else if (tag == "EDGE") {
            need(tok, 6, ctx(path, lineNo, "EDGE"));
            Edge e;
            e.id = tok[1];
            int from = -1, to = -1;
            for (size_t i = 0; i < net.nodes.size(); ++i) {
                if (net.nodes[i].id == tok[2]) from = static_cast<int>(i);
                if (net.nodes[i].id == tok[3]) to = static_cast<int>(i);
            }
            if (from < 0) throw ParseError(ctx(path, lineNo, "EDGE") + ": unknown node '" + tok[2] + "'");
            if (to < 0) throw ParseError(ctx(path, lineNo, "EDGE") + ": unknown node '" + tok[3] + "'");
            e.from = from;
            e.to = to;
            e.length = parseDouble(tok[4], ctx(path, lineNo, "EDGE length"));
            e.laneCount = static_cast<int>(parseLong(tok[5], ctx(path, lineNo, "EDGE lanes")));
            net.edges.push_back(e);
        } else if (tag == "LANE") {
            need(tok, 4, ctx(path, lineNo, "LANE"));
            pendingLanes.push_back({tok[1], static_cast<int>(parseLong(tok[2], ctx(path, lineNo, "LANE index"))),
                                    parseDouble(tok[3], ctx(path, lineNo, "LANE limit")), lineNo});
        } else if (tag == "CONN") {
            need(tok, 5, ctx(path, lineNo, "CONN"));
            pendingConns.push_back({tok[1], static_cast<int>(parseLong(tok[2], ctx(path, lineNo, "CONN from-lane"))),
                                    tok[3], static_cast<int>(parseLong(tok[4], ctx(path, lineNo, "CONN to-lane"))),
                                    lineNo});
        } else if (tag == "LIGHT") {
            need(tok, 3, ctx(path, lineNo, "LIGHT"));
            pendingLights.push_back({tok[1], tok[2], lineNo});
        } else if (tag == "DET") {
            need(tok, 7, ctx(path, lineNo, "DET"));
            pendingDets.push_back({tok[1], tok[2], static_cast<int>(parseLong(tok[3], ctx(path, lineNo, "DET lane"))),
                                   parseDouble(tok[4], ctx(path, lineNo, "DET pos")),
                                   parseDouble(tok[5], ctx(path, lineNo, "DET zone")), tok[6], lineNo});
        } else {
            throw ParseError(ctx(path, lineNo, "record") + ": unknown tag '" + tag + "'");
        }
    }

    net.rebuildIndexes();

    // lanes default to one per EDGE declaration; LANE records set limits
    for (Edge& e : net.edges) {
        e.firstLane = static_cast<int>(net.lanes.size());
        for (int i = 0; i < e.laneCount; ++i) {
            Lane l;
            l.edge = net.edgeIndex(e.id);
            l.index = i;
            l.speedLimit = 0;
            net.lanes.push_back(l);
        }
    }
    for (const auto& pl : pendingLanes) {
        int e = net.edgeIndex(pl.edge);
        if (e < 0) throw ParseError(ctx(path, pl.lineNo, "LANE") + ": unknown edge '" + pl.edge + "'");
        if (pl.index < 0 || pl.index >= net.edges[e].laneCount)
            throw ValidationError(ctx(path, pl.lineNo, "LANE") + ": lane index " + std::to_string(pl.index) +
                                  " out of range for edge '" + pl.edge + "'");
        net.lanes[net.edges[e].firstLane + pl.index].speedLimit = pl.limit;
    }
    for (const auto& pc : pendingConns) {
        int fe = net.edgeIndex(pc.fe);
        int te = net.edgeIndex(pc.te);
        if (fe < 0) throw ValidationError(ctx(path, pc.lineNo, "CONN") + ": connection references missing lane '" +
                                          pc.fe + "_" + std::to_string(pc.fl) + "'");
        if (te < 0) throw ValidationError(ctx(path, pc.lineNo, "CONN") + ": connection references missing lane '" +
                                          pc.te + "_" + std::to_string(pc.tl) + "'");
        if (pc.fl < 0 || pc.fl >= net.edges[fe].laneCount || pc.tl < 0 || pc.tl >= net.edges[te].laneCount)
            throw ValidationError(ctx(path, pc.lineNo, "CONN") + ": connection references missing lane");
        Connection c;
        c.fromLane = net.edges[fe].firstLane + pc.fl;
        c.toLane = net.edges[te].firstLane + pc.tl;
        net.connections.push_back(c);
    }
    for (const auto& plt : pendingLights) {
        LightDef l;
        l.id = plt.id;
        l.node = net.nodeIndex(plt.node);
        if (l.node < 0)
            throw ParseError(ctx(path, plt.lineNo, "LIGHT") + ": unknown node '" + plt.node + "'");
        net.lights.push_back(l);
    }
    net.rebuildIndexes();
    for (const auto& pd : pendingDets) {
        int e = net.edgeIndex(pd.edge);
        if (e < 0) throw ParseError(ctx(path, pd.lineNo, "DET") + ": unknown edge '" + pd.edge + "'");
        if (pd.lane < 0 || pd.lane >= net.edges[e].laneCount)
            throw ValidationError(ctx(path, pd.lineNo, "DET") + ": lane index out of range");
        Detector d;
        d.id = pd.id;
        d.lane = net.edges[e].firstLane + pd.lane;
        d.position = pd.pos;
        d.zoneLength = pd.zone;
        if (pd.kind == "local") d.kind = DetectorKind::Local;
        else if (pd.kind == "remote") d.kind = DetectorKind::Remote;
        else throw ParseError(ctx(path, pd.lineNo, "DET kind") + ": expected local|remote, got '" + pd.kind + "'");
        net.detectors.push_back(d);
    }
    net.rebuildIndexes();
    net.validate();
    return net;
}

std::string networkToString(const RoadNetwork& net) {
    std::ostringstream out;
    out << "# greenwave network 1\n";
    for (const Node& n : net.nodes)
        out << "NODE " << n.id << " " << formatDouble(n.x) << " " << formatDouble(n.y) << "\n";
    for (const Edge& e : net.edges)
        out << "EDGE " << e.id << " " << net.nodes[e.from].id << " " << net.nodes[e.to].id << " "
            << formatDouble(e.length) << " " << e.laneCount << "\n";
    for (const Edge& e : net.edges)
        for (int i = 0; i < e.laneCount; ++i)
            out << "LANE " << e.id << " " << i << " "
                << formatDouble(net.lanes[e.firstLane + i].speedLimit) << "\n";
    for (const Connection& c : net.connections) {
        const Lane& fl = net.lanes[c.fromLane];
        const Lane& tl = net.lanes[c.toLane];
        out << "CONN " << net.edges[fl.edge].id << " " << fl.index << " " << net.edges[tl.edge].id
            << " " << tl.index << "\n";
    }
    for (const LightDef& l : net.lights)
        out << "LIGHT " << l.id << " " << net.nodes[l.node].id << "\n";
    for (const Detector& d : net.detectors) {
        const Lane& ln = net.lanes[d.lane];
        out << "DET " << d.id << " " << net.edges[ln.edge].id << " " << ln.index << " "
            << formatDouble(d.position) << " " << formatDouble(d.zoneLength) << " "
            << (d.kind == DetectorKind::Local ? "local" : "remote") << "\n";
    }
    return out.str();
}

void saveNetwork(const RoadNetwork& net, const std::string& path) {
    writeFile(path, networkToString(net));
}

Demand loadDemand(const std::string& path, const RoadNetwork& net) {
    std::istringstream in(readFile(path));
    Demand demand;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        auto tok = splitTokens(line);
        if (tok.empty()) continue;
        const std::string& tag = tok[0];
        if (tag == "ROUTE") {
            need(tok, 4, ctx(path, lineNo, "ROUTE"));
            Route r;
            r.id = tok[1];
            r.entryOffset = parseDouble(tok[2], ctx(path, lineNo, "ROUTE offset"));
            for (size_t i = 3; i < tok.size(); ++i) {
                int e = net.edgeIndex(tok[i]);
                if (e < 0)
                    throw ValidationError(ctx(path, lineNo, "ROUTE") + ": unknown edge '" + tok[i] + "'");
                r.edges.push_back(e);
            }
            demand.routes.push_back(r);
        } else if (tag == "CAR") {
            need(tok, 5, ctx(path, lineNo, "CAR"));
            TravelRecord rec;
            rec.vehicleId = tok[1];
            rec.route = -1;
            for (size_t i = 0; i < demand.routes.size(); ++i)
                if (demand.routes[i].id == tok[2]) { rec.route = static_cast<int>(i); break; }
            if (rec.route < 0)
                throw ValidationError(ctx(path, lineNo, "CAR") + ": unknown route '" + tok[2] + "'");
            rec.entry = parseDouble(tok[3], ctx(path, lineNo, "CAR entry")) +
                        demand.routes[rec.route].entryOffset;
            rec.vehicleType = static_cast<int>(parseLong(tok[4], ctx(path, lineNo, "CAR vtype")));
            if (tok.size() > 5 && tok[5] != "-")
                rec.exit = parseDouble(tok[5], ctx(path, lineNo, "CAR exit"));
            demand.records.push_back(rec);
        } else {
            throw ParseError(ctx(path, lineNo, "record") + ": unknown tag '" + tag + "'");
        }
    }
    demand.rebuildIndexes();
    validateDemand(demand, net);
    sortRecords(demand.records);
    return demand;
}

std::string demandToString(const Demand& demand, const RoadNetwork& net) {
    std::ostringstream out;
    out << "# greenwave demand 1\n";
    for (const Route& r : demand.routes) {
        out << "ROUTE " << r.id << " " << formatDouble(r.entryOffset);
        for (int e : r.edges) out << " " << net.edges[e].id;
        out << "\n";
    }
    std::vector<TravelRecord> recs = demand.records;
    sortRecords(recs);
    for (const TravelRecord& rec : recs) {
        // entries are stored with the route offset already applied
        out << "CAR " << rec.vehicleId << " " << demand.routes[rec.route].id << " "
            << formatDouble(rec.entry - demand.routes[rec.route].entryOffset) << " "
            << rec.vehicleType;
        out << " " << (rec.hasExit() ? formatDouble(rec.exit) : "-") << "\n";
    }
    return out.str();
}

void saveDemand(const Demand& demand, const RoadNetwork& net, const std::string& path) {
    writeFile(path, demandToString(demand, net));
}

} // namespace greenwave
