#include "csi/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "csi/serialize.hpp"
#include "csi/session.hpp"

namespace csi {

ForensicReport forensic_report(std::span<const SessionEvent> log) {
  const Session session = Session::replay(log);
  ForensicReport report;
  report.session_id = session.config().session_id;
  report.mode = session.config().mode;
  report.topology = session.topology();
  report.started_at = session.started_at();
  report.subgroups = session.subgroups();

  IdeaIndex index(TaxonomyConfig::from(session.config()));
  std::map<MessageId, const ChatMessage*> messages;
  for (const auto& event : log) {
    if (const auto* posted = std::get_if<MessagePosted>(&event.payload)) {
      const ChatMessage& m = posted->message;
      messages[m.id] = &m;
      if (m.is_human()) {
        ++report.human_messages;
        index.record_assertion(m);
      } else {
        ++report.relayed_messages;
      }
    } else if (const auto* ended = std::get_if<SessionEnded>(&event.payload)) {
      report.ended_at = event.wall_time;
      report.end_reason = ended->reason;
    }
  }

  std::map<IdeaId, IdeaSummary> ideas;
  for (const auto& node : index.ideas()) {
    IdeaSummary s;
    s.id = node.id;
    const ChatMessage* first = messages.at(node.first_message_id);
    s.text = first->text;
    s.first_message_id = node.first_message_id;
    s.first_subgroup = first->subgroup;
    s.first_mentioned_at = node.first_mentioned_at;
    s.subgroups.assign(node.subgroups_mentioning.begin(), node.subgroups_mentioning.end());
    s.stance = index.tally(node.id);
    ideas.emplace(node.id, std::move(s));
  }
  for (const auto& link : index.stance_links()) {
    const ChatMessage* m = messages.at(link.message_id);
    const IdeaNode* node = index.find(link.idea_id);
    const bool assertion = std::find(node->mention_message_ids.begin(),
                                     node->mention_message_ids.end(),
                                     link.message_id) != node->mention_message_ids.end();
    ideas.at(link.idea_id)
        .timeline.push_back(IdeaMention{m->id, m->subgroup, std::get<ParticipantId>(m->author),
                                        m->timestamp, link.stance, assertion});
  }
  for (auto& [_, s] : ideas) {
    std::stable_sort(s.timeline.begin(), s.timeline.end(),
                     [](const IdeaMention& a, const IdeaMention& b) { return a.at < b.at; });
    report.ideas.push_back(std::move(s));
  }
  std::sort(report.ideas.begin(), report.ideas.end(),
            [](const IdeaSummary& a, const IdeaSummary& b) {
              if (a.subgroups.size() != b.subgroups.size())
                return a.subgroups.size() > b.subgroups.size();
              if (a.stance.net() != b.stance.net()) return a.stance.net() > b.stance.net();
              if (a.first_mentioned_at != b.first_mentioned_at)
                return a.first_mentioned_at < b.first_mentioned_at;
              return a.id < b.id;
            });

  const auto propagation = propagation_metrics(log);
  for (const auto& record : propagation) {
    const Insight& insight = session.insights().at(record.insight_id);
    InsightSummary s{insight.id,         insight.source_subgroup,
                     insight.text,       insight.created_at,
                     insight.source_message_ids, record.eligible_receivers, {}};
    for (const auto& imp : impact(insight, log, session.config().impact_window))
      s.edges.push_back({imp.receiving_subgroup, imp.delivered_at, imp.follow_on_count});
    report.insights.push_back(std::move(s));
  }
  report.participation = participation_metrics(log);
  return report;
}

namespace {

json opt_ms(const std::optional<Millis>& t) { return t ? json(t->count()) : json(nullptr); }

std::string clock(Millis offset) {
  const long long s = std::max<long long>(0, offset.count() / 1000);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld", s / 60, s % 60);
  return buf;
}

std::string shorten(const std::string& text, std::size_t max) {
  if (text.size() <= max) return text;
  return text.substr(0, max - 3) + "...";
}

}  // namespace

std::string report_json(const ForensicReport& r) {
  json doc;
  doc["session_id"] = r.session_id;
  doc["mode"] = to_string(r.mode);
  doc["topology"] = to_string(r.topology);
  doc["started_at"] = opt_ms(r.started_at);
  doc["ended_at"] = opt_ms(r.ended_at);
  doc["end_reason"] = r.end_reason;
  doc["subgroups"] = r.subgroups;
  doc["human_messages"] = r.human_messages;
  doc["relayed_messages"] = r.relayed_messages;

  json ideas = json::array();
  for (std::size_t rank = 0; rank < r.ideas.size(); ++rank) {
    const auto& s = r.ideas[rank];
    json timeline = json::array();
    for (const auto& m : s.timeline)
      timeline.push_back({{"message_id", m.message_id},
                          {"subgroup_id", m.subgroup},
                          {"author", m.author},
                          {"at", m.at.count()},
                          {"stance", to_string(m.stance)},
                          {"assertion", m.assertion}});
    ideas.push_back({{"rank", rank + 1},
                     {"idea_id", s.id},
                     {"text", s.text},
                     {"first_message_id", s.first_message_id},
                     {"first_subgroup", s.first_subgroup},
                     {"first_mentioned_at", s.first_mentioned_at.count()},
                     {"subgroups", s.subgroups},
                     {"support", s.stance.support},
                     {"oppose", s.stance.oppose},
                     {"neutral", s.stance.neutral},
                     {"net_support", s.stance.net()},
                     {"timeline", timeline}});
  }
  doc["ideas"] = ideas;

  json insights = json::array();
  for (const auto& s : r.insights) {
    json edges = json::array();
    for (const auto& e : s.edges)
      edges.push_back({{"from", s.source},
                       {"to", e.receiver},
                       {"delivered_at", e.delivered_at.count()},
                       {"follow_on_count", e.follow_on_count}});
    insights.push_back({{"insight_id", s.id},
                        {"source_subgroup", s.source},
                        {"text", s.text},
                        {"created_at", s.created_at.count()},
                        {"source_message_ids", s.source_message_ids},
                        {"eligible_receivers", s.eligible_receivers},
                        {"coverage", s.edges.size()},
                        {"edges", edges}});
  }
  doc["insights"] = insights;

  json people = json::array();
  for (const auto& p : r.participation.per_participant)
    people.push_back({{"participant_id", p.participant},
                      {"display_name", p.display_name},
                      {"subgroup_id", p.subgroup ? json(*p.subgroup) : json(nullptr)},
                      {"messages", p.messages}});
  doc["participation"] = {{"participants", people},
                          {"spread", r.participation.spread},
                          {"gini", r.participation.gini}};
  return doc.dump(2) + "\n";
}

std::string render_report_text(const ForensicReport& r, std::size_t max_ideas) {
  const Millis origin = r.started_at.value_or(Millis{0});
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "Session %s (%s, %s)\n",
                r.session_id.empty() ? "(unnamed)" : r.session_id.value.c_str(),
                std::string(to_string(r.mode)).c_str(), std::string(to_string(r.topology)).c_str());
  out += buf;
  std::snprintf(buf, sizeof buf,
                "%zu subgroups, %zu participants, %zu human messages, %zu relayed\n",
                r.subgroups.size(), r.participation.per_participant.size(), r.human_messages,
                r.relayed_messages);
  out += buf;
  if (r.ended_at) {
    out += "Ended at " + clock(*r.ended_at - origin) + " (" + r.end_reason + ")\n";
  }

  out += "\nTop ideas\n";
  if (r.ideas.empty()) out += "  (none)\n";
  for (std::size_t i = 0; i < r.ideas.size() && i < max_ideas; ++i) {
    const auto& s = r.ideas[i];
    std::snprintf(buf, sizeof buf,
                  "%3zu. %s \"%s\"\n     reach %zu/%zu subgroups, support %zu, oppose %zu, "
                  "net %+ld, first %s in %s\n",
                  i + 1, s.id.value.c_str(), shorten(s.text, 70).c_str(), s.subgroups.size(),
                  r.subgroups.size(), s.stance.support, s.stance.oppose, s.stance.net(),
                  clock(s.first_mentioned_at - origin).c_str(), s.first_subgroup.value.c_str());
    out += buf;
    constexpr std::size_t kTimelineShown = 12;
    std::string line = "     timeline:";
    for (std::size_t k = 0; k < s.timeline.size() && k < kTimelineShown; ++k) {
      const auto& m = s.timeline[k];
      std::string entry = " " + clock(m.at - origin) + " " + m.subgroup.value;
      if (m.stance != Stance::neutral) entry += " " + std::string(to_string(m.stance));
      if (line.size() + entry.size() > 96) {
        out += line + "\n";
        line = "              ";
      }
      line += entry;
    }
    if (s.timeline.size() > kTimelineShown)
      line += " ... (+" + std::to_string(s.timeline.size() - kTimelineShown) + " more)";
    out += line + "\n";
  }

  out += "\nInsight propagation\n";
  if (r.insights.empty()) out += "  (none)\n";
  for (const auto& s : r.insights) {
    std::snprintf(buf, sizeof buf, "  %s from %s at %s, reached %zu/%zu\n", s.id.value.c_str(),
                  s.source.value.c_str(), clock(s.created_at - origin).c_str(), s.edges.size(),
                  s.eligible_receivers);
    out += buf;
    for (const auto& e : s.edges) {
      std::snprintf(buf, sizeof buf, "    -> %s at %s, %zu follow-on\n", e.receiver.value.c_str(),
                    clock(e.delivered_at - origin).c_str(), e.follow_on_count);
      out += buf;
    }
  }

  out += "\nParticipation\n";
  for (const auto& p : r.participation.per_participant) {
    std::snprintf(buf, sizeof buf, "  %s %-20s %-6s %4zu\n", p.participant.value.c_str(),
                  shorten(p.display_name, 20).c_str(),
                  p.subgroup ? p.subgroup->value.c_str() : "-", p.messages);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "  spread %zu, gini %.3f\n", r.participation.spread,
                r.participation.gini);
  out += buf;
  return out;
}

}  // namespace csi
