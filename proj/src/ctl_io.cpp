#include <fstream>
#include <sstream>

#include "greenwave/controllers.hpp"

namespace greenwave {

namespace {

std::vector<std::string> splitTokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
        if (tok[0] == '#') break;
        out.push_back(tok);
    }
    return out;
}

} // namespace

const LightControllerConfig* ControllerConfigSet::find(const std::string& lightId) const {
    for (const LightControllerConfig& c : lights)
        if (c.lightId == lightId) return &c;
    return nullptr;
}

ControllerConfigSet loadControllers(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    ControllerConfigSet cfg;
    LightControllerConfig cur;
    bool open = false;
    std::string line;
    int lineNo = 0;
    auto where = [&](const std::string& f) {
        return path + ":" + std::to_string(lineNo) + " " + f;
    };
    while (std::getline(in, line)) {
        ++lineNo;
        auto tok = splitTokens(line);
        if (tok.empty()) continue;
        const std::string& tag = tok[0];
        if (tag == "LIGHT") {
            if (open) throw ParseError(where("LIGHT") + ": previous block not closed with END");
            if (tok.size() < 3) throw ParseError(where("LIGHT") + ": expected id and kind");
            cur = LightControllerConfig{};
            cur.lightId = tok[1];
            if (tok[2] == "static") cur.kind = ControllerKind::Static;
            else if (tok[2] == "auction") cur.kind = ControllerKind::Auction;
            else if (tok[2] == "planning") cur.kind = ControllerKind::Planning;
            else throw ParseError(where("LIGHT kind") + ": expected static|auction|planning");
            open = true;
        } else if (!open) {
            throw ParseError(where(tag) + ": record outside a LIGHT block");
        } else if (tag == "PHASE") {
            if (tok.size() < 3) throw ParseError(where("PHASE") + ": expected state and min duration");
            GreenPhase p;
            p.state = tok[1];
            p.minDuration = parseDouble(tok[2], where("PHASE min"));
            cur.phases.push_back(p);
        } else if (tag == "OFFSET") {
            cur.st.offset = parseDouble(tok.at(1), where("OFFSET"));
        } else if (tag == "DUR") {
            cur.st.durations.clear();
            for (size_t i = 1; i < tok.size(); ++i)
                cur.st.durations.push_back(parseDouble(tok[i], where("DUR")));
        } else if (tag == "CYCLE") {
            cur.st.fixedCycle = tok.at(1) == "fixed";
        } else if (tag == "DURS") {
            if (tok.size() < 4) throw ParseError(where("DURS") + ": expected three durations");
            cur.au.minimumDuration = parseDouble(tok[1], where("DURS min"));
            cur.au.priorityDuration = parseDouble(tok[2], where("DURS priority"));
            cur.au.releaseDuration = parseDouble(tok[3], where("DURS release"));
        } else if (tag == "DETS") {
            cur.au.detectorIds.assign(tok.begin() + 1, tok.end());
        } else if (tag == "W") {
            if (tok.size() < 2) throw ParseError(where("W") + ": expected phase index");
            size_t phase = static_cast<size_t>(parseLong(tok[1], where("W phase")));
            if (cur.au.weights.size() <= phase) cur.au.weights.resize(phase + 1);
            cur.au.weights[phase].clear();
            for (size_t i = 2; i < tok.size(); ++i)
                cur.au.weights[phase].push_back(parseDouble(tok[i], where("W")));
        } else if (tag == "PEN") {
            if (tok.size() < 4) throw ParseError(where("PEN") + ": expected three weights");
            cur.pl.speedLossWeight = parseDouble(tok[1], where("PEN speed-loss"));
            cur.pl.waitingWeight = parseDouble(tok[2], where("PEN waiting"));
            cur.pl.phaseChangeWeight = parseDouble(tok[3], where("PEN change"));
        } else if (tag == "END") {
            cfg.lights.push_back(cur);
            open = false;
        } else {
            throw ParseError(where("record") + ": unknown tag '" + tag + "'");
        }
    }
    if (open) throw ParseError(path + ": unterminated LIGHT block");
    return cfg;
}

std::string controllersToString(const ControllerConfigSet& cfg) {
    std::ostringstream out;
    out << "# greenwave controllers 1\n";
    for (const LightControllerConfig& c : cfg.lights) {
        out << "LIGHT " << c.lightId << " "
            << (c.kind == ControllerKind::Static
                    ? "static"
                    : (c.kind == ControllerKind::Auction ? "auction" : "planning"))
            << "\n";
        for (const GreenPhase& p : c.phases)
            out << "PHASE " << p.state << " " << formatDouble(p.minDuration) << "\n";
        if (c.kind == ControllerKind::Static) {
            out << "OFFSET " << formatDouble(c.st.offset) << "\n";
            out << "DUR";
            for (double d : c.st.durations) out << " " << formatDouble(d);
            out << "\n";
            out << "CYCLE " << (c.st.fixedCycle ? "fixed" : "free") << "\n";
        } else if (c.kind == ControllerKind::Auction) {
            out << "DURS " << formatDouble(c.au.minimumDuration) << " "
                << formatDouble(c.au.priorityDuration) << " "
                << formatDouble(c.au.releaseDuration) << "\n";
            out << "DETS";
            for (const std::string& d : c.au.detectorIds) out << " " << d;
            out << "\n";
            for (size_t p = 0; p < c.au.weights.size(); ++p) {
                out << "W " << p;
                for (double w : c.au.weights[p]) out << " " << formatDouble(w);
                out << "\n";
            }
        } else {
            out << "PEN " << formatDouble(c.pl.speedLossWeight) << " "
                << formatDouble(c.pl.waitingWeight) << " "
                << formatDouble(c.pl.phaseChangeWeight) << "\n";
        }
        out << "END\n";
    }
    return out.str();
}

void saveControllers(const ControllerConfigSet& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    out << controllersToString(cfg);
}

void validateControllers(const ControllerConfigSet& cfg, const RoadNetwork& net) {
    for (const LightControllerConfig& c : cfg.lights) {
        int li = net.lightIndex(c.lightId);
        if (li < 0) throw ValidationError("controller references unknown light '" + c.lightId + "'");
        size_t conns = net.lights[li].conns.size();
        if (c.phases.empty())
            throw ValidationError("light '" + c.lightId + "' has no phases");
        for (const GreenPhase& p : c.phases) {
            if (p.state.size() != conns)
                throw ValidationError("light '" + c.lightId + "': phase state '" + p.state +
                                      "' does not match its " + std::to_string(conns) +
                                      " controlled connections");
            for (char ch : p.state)
                if (ch != 'G' && ch != 'r')
                    throw ValidationError("light '" + c.lightId +
                                          "': green phase states may only contain G and r");
            if (p.minDuration < 1.0)
                throw ValidationError("light '" + c.lightId + "': minimum phase duration < 1 s");
        }
        if (c.kind == ControllerKind::Static) {
            if (c.st.durations.size() != c.phases.size())
                throw ValidationError("light '" + c.lightId + "': DUR must list one entry per phase");
            for (size_t i = 0; i < c.st.durations.size(); ++i)
                if (c.st.durations[i] + 1e-9 < c.phases[i].minDuration)
                    throw ValidationError("light '" + c.lightId +
                                          "': phase duration below its minimum");
            if (c.st.offset < 0)
                throw ValidationError("light '" + c.lightId + "': offset must be >= 0");
        } else if (c.kind == ControllerKind::Auction) {
            const AuctionParams& a = c.au;
            if (!(0 < a.minimumDuration && a.minimumDuration <= a.priorityDuration &&
                  a.priorityDuration <= a.releaseDuration))
                throw ValidationError("light '" + c.lightId +
                                      "': need 0 < minimum <= priority <= release");
            if (a.weights.size() != c.phases.size())
                throw ValidationError("light '" + c.lightId + "': one W row required per phase");
            for (const auto& row : a.weights) {
                if (row.size() != a.detectorIds.size())
                    throw ValidationError("light '" + c.lightId +
                                          "': weight row length does not match DETS");
                for (double w : row)
                    if (std::abs(w) > kWeightMax + 1e-9)
                        throw ValidationError("light '" + c.lightId + "': weight outside [-" +
                                              formatDouble(kWeightMax) + ", " +
                                              formatDouble(kWeightMax) + "]");
            }
            for (const std::string& d : a.detectorIds)
                if (net.detectorIndex(d) < 0)
                    throw ValidationError("light '" + c.lightId + "': unknown detector '" + d + "'");
        } else {
            if (c.pl.speedLossWeight < 0 || c.pl.waitingWeight < 0 || c.pl.phaseChangeWeight < 0)
                throw ValidationError("light '" + c.lightId + "': penalty weights must be >= 0");
        }
    }
    for (const LightDef& l : net.lights)
        if (!cfg.find(l.id))
            throw ValidationError("no controller configured for light '" + l.id + "'");
}

} // namespace greenwave
