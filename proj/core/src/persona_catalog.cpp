// Shipped fixture personas. Recipes come from one activity library so the
// same intention always means the same action sequence across participants.

#include <cstdio>
#include <map>
#include <string>

#include "lsti/error.hpp"
#include "lsti/persona.hpp"

namespace lsti {

namespace {

using Days = std::vector<int>;
const Days kDaily{0, 1, 2, 3, 4, 5, 6};
const Days kWorkdays{0, 1, 2, 3, 4};
const Days kWeekend{5, 6};

RecipeStep step(const char* action, const char* object, int minutes, const char* room) {
  return RecipeStep{action, object, minutes, room, std::nullopt};
}

RecipeStep restock(const char* object, int minutes, int amount) {
  return RecipeStep{"put", object, minutes, "kitchen", PostSpec{std::nullopt, amount}};
}

std::vector<RecipeStep> recipe_for(const std::string& intention) {
  static const std::map<std::string, std::vector<RecipeStep>> kLibrary = {
      {"wake up", {step("turn_off", "alarm_clock", 2, "bedroom"),
                   step("dress", "clothes", 8, "bedroom")}},
      {"morning hygiene", {step("turn_on", "shower", 12, "bathroom"),
                           step("turn_off", "shower", 1, "bathroom"),
                           step("brush", "toothbrush", 4, "bathroom")}},
      {"make breakfast", {step("open", "fridge", 2, "kitchen"),
                          step("eat", "bread", 16, "kitchen")}},
      {"make coffee", {step("turn_on", "coffee_machine", 3, "kitchen"),
                       step("drink", "cup", 12, "kitchen")}},
      {"go to work", {step("grab", "keys", 2, "hall"),
                      step("walk_to", "front_door", 478, "hall")}},
      {"work from home", {step("turn_on", "computer", 3, "study"),
                          step("use", "computer", 200, "study"),
                          step("turn_off", "computer", 2, "study")}},
      {"make lunch", {step("turn_on", "microwave", 5, "kitchen"),
                      step("eat", "plate", 20, "kitchen")}},
      {"make dinner", {step("turn_on", "stove", 3, "kitchen"),
                       step("cook", "pan", 35, "kitchen"),
                       step("eat", "plate", 25, "kitchen")}},
      {"wash dishes", {step("turn_on", "sink", 1, "kitchen"),
                       step("wash", "plate", 13, "kitchen")}},
      {"watch tv", {step("turn_on", "tv", 1, "living room"),
                    step("watch", "tv", 70, "living room")}},
      {"read a novel", {step("grab", "book", 2, "living room"),
                        step("read", "book", 50, "living room")}},
      {"play video games", {step("turn_on", "game_console", 2, "living room"),
                            step("play", "game_console", 80, "living room")}},
      {"call family", {step("grab", "phone", 1, "living room"),
                       step("call", "phone", 30, "living room")}},
      {"do laundry", {step("turn_on", "washing_machine", 5, "bathroom"),
                      step("grab", "towel", 10, "bathroom")}},
      {"clean the house", {step("turn_on", "vacuum_cleaner", 2, "living room"),
                           step("clean", "sofa", 45, "living room")}},
      {"go shopping", {step("walk_to", "front_door", 80, "hall"), restock("apple", 4, 6),
                       restock("bread", 3, 8)}},
      {"take a bath", {step("turn_on", "bathtub", 30, "bathroom"),
                       step("turn_off", "bathtub", 2, "bathroom")}},
      {"evening study", {step("turn_on", "desk_lamp", 2, "study"),
                         step("write", "notebook", 60, "study")}},
      {"prepare for bed", {step("brush", "toothbrush", 4, "bathroom"),
                           step("turn_on", "alarm_clock", 1, "bedroom")}},
      {"go for a run", {step("dress", "clothes", 5, "bedroom"),
                        step("walk_to", "front_door", 45, "hall")}},
      {"have a snack", {step("open", "fridge", 1, "kitchen"),
                        step("eat", "apple", 6, "kitchen")}},
  };
  const auto it = kLibrary.find(intention);
  if (it == kLibrary.end()) throw ConfigError("no recipe for activity '" + intention + "'");
  return it->second;
}

int clock(const char* hhmm) {
  int h = 0, m = 0;
  std::sscanf(hhmm, "%d:%d", &h, &m);
  return h * 60 + m;
}

RoutineEntry at(const char* hhmm, Days days, const char* intention) {
  return RoutineEntry{std::move(days), clock(hhmm), intention, recipe_for(intention)};
}

// Lies down at `hhmm` and sleeps until `wake` (possibly the next day).
RoutineEntry sleep_at(const char* hhmm, Days days, const char* wake) {
  const int start = clock(hhmm);
  int end = clock(wake);
  if (end <= start) end += kMinutesPerDay;
  return RoutineEntry{std::move(days), start, "sleep",
                      {step("lie", "bed", 5, "bedroom"),
                       step("sleep", "bed", end - start - 5, "bedroom")}};
}

Persona office_worker(std::string id, double jitter, double mistakes) {
  return Persona{std::move(id),
                 {
                     at("06:30", kDaily, "wake up"),
                     at("06:45", kDaily, "morning hygiene"),
                     at("07:10", kWorkdays, "make coffee"),
                     at("07:30", kWorkdays, "make breakfast"),
                     at("07:55", kWorkdays, "go to work"),
                     at("08:30", kWeekend, "make breakfast"),
                     at("10:00", {5}, "go shopping"),
                     at("10:00", {6}, "clean the house"),
                     at("12:30", kWeekend, "make lunch"),
                     at("14:00", {6}, "call family"),
                     at("15:00", {5}, "play video games"),
                     at("18:00", kDaily, "make dinner"),
                     at("19:15", kDaily, "wash dishes"),
                     at("20:00", {0, 2, 4, 5, 6}, "watch tv"),
                     at("20:00", {1, 3}, "read a novel"),
                     at("22:00", kDaily, "prepare for bed"),
                     sleep_at("22:10", kDaily, "06:30"),
                 },
                 mistakes,
                 jitter};
}

}  // namespace

std::vector<Persona> standard_personas() {
  std::vector<Persona> out;
  out.push_back(office_worker("P01", 10.0, 0.10));

  out.push_back(Persona{"P02",
                        {
                            at("08:30", kDaily, "wake up"),
                            at("08:45", kDaily, "morning hygiene"),
                            at("09:10", kDaily, "make coffee"),
                            at("09:30", kWorkdays, "work from home"),
                            at("10:30", kWeekend, "play video games"),
                            at("13:00", kDaily, "make lunch"),
                            at("14:00", {2}, "go shopping"),
                            at("15:00", kWeekend, "call family"),
                            at("17:00", {1, 3}, "go for a run"),
                            at("18:30", kDaily, "make dinner"),
                            at("19:40", kDaily, "wash dishes"),
                            at("20:00", kWorkdays, "evening study"),
                            at("21:15", kDaily, "watch tv"),
                            at("23:30", kDaily, "have a snack"),
                            at("23:45", kDaily, "prepare for bed"),
                            sleep_at("23:55", kDaily, "08:30"),
                        },
                        0.12,
                        15.0});

  out.push_back(Persona{"P03",
                        {
                            at("06:00", kDaily, "wake up"),
                            at("06:15", kDaily, "make coffee"),
                            at("06:40", kDaily, "go for a run"),
                            at("07:35", kDaily, "morning hygiene"),
                            at("08:00", kDaily, "make breakfast"),
                            at("09:00", {0, 3}, "go shopping"),
                            at("09:00", {1, 4}, "clean the house"),
                            at("09:00", {2, 5, 6}, "read a novel"),
                            at("11:30", kDaily, "make lunch"),
                            at("13:00", kDaily, "call family"),
                            at("14:00", {0, 2, 4}, "do laundry"),
                            at("15:00", kDaily, "watch tv"),
                            at("17:30", kDaily, "make dinner"),
                            at("18:45", kDaily, "wash dishes"),
                            at("19:30", kDaily, "take a bath"),
                            at("20:30", kDaily, "prepare for bed"),
                            sleep_at("20:40", kDaily, "06:00"),
                        },
                        0.08,
                        8.0});

  out.push_back(Persona{"P04",
                        {
                            at("05:45", kDaily, "wake up"),
                            at("06:00", kDaily, "go for a run"),
                            at("06:55", kDaily, "morning hygiene"),
                            at("07:20", kDaily, "make breakfast"),
                            at("07:45", kWorkdays, "go to work"),
                            at("09:00", kWeekend, "clean the house"),
                            at("10:30", kWeekend, "go shopping"),
                            at("12:30", kWeekend, "make lunch"),
                            at("14:00", kWeekend, "watch tv"),
                            at("16:00", kWorkdays, "have a snack"),
                            at("17:30", kDaily, "make dinner"),
                            at("18:40", kDaily, "wash dishes"),
                            at("19:00", {1, 3}, "call family"),
                            at("19:40", kDaily, "read a novel"),
                            at("21:00", kDaily, "take a bath"),
                            at("21:40", kDaily, "prepare for bed"),
                            sleep_at("21:50", kDaily, "05:45"),
                        },
                        0.10,
                        12.0});

  out.push_back(Persona{"P05",
                        {
                            at("06:15", kDaily, "wake up"),
                            at("06:30", kDaily, "make coffee"),
                            at("06:50", kDaily, "make breakfast"),
                            at("07:15", kDaily, "morning hygiene"),
                            at("08:00", kDaily, "do laundry"),
                            at("09:00", kWorkdays, "clean the house"),
                            at("10:00", {0, 3}, "go shopping"),
                            at("12:00", kDaily, "make lunch"),
                            at("13:00", kDaily, "call family"),
                            at("14:00", kWorkdays, "work from home"),
                            at("14:00", kWeekend, "watch tv"),
                            at("17:45", kDaily, "make dinner"),
                            at("19:00", kDaily, "wash dishes"),
                            at("19:30", kDaily, "read a novel"),
                            at("20:30", kWeekend, "play video games"),
                            at("22:00", kDaily, "prepare for bed"),
                            sleep_at("22:10", kDaily, "06:15"),
                        },
                        0.15,
                        10.0});

  out.push_back(Persona{"P06",
                        {
                            at("00:15", kDaily, "prepare for bed"),
                            sleep_at("00:25", kDaily, "09:30"),
                            at("09:30", kDaily, "wake up"),
                            at("09:45", kDaily, "make coffee"),
                            at("10:05", kDaily, "have a snack"),
                            at("10:30", kWorkdays, "work from home"),
                            at("11:00", kWeekend, "play video games"),
                            at("14:00", kDaily, "make lunch"),
                            at("15:00", kDaily, "play video games"),
                            at("16:30", {1, 4}, "go shopping"),
                            at("17:00", {0, 2, 3, 5, 6}, "watch tv"),
                            at("19:00", kDaily, "make dinner"),
                            at("20:10", kDaily, "wash dishes"),
                            at("21:00", kDaily, "play video games"),
                            at("22:30", {0, 2, 4}, "evening study"),
                            at("23:40", kDaily, "take a bath"),
                        },
                        0.12,
                        15.0});

  const Days early{0, 1, 2};
  const Days late{3, 4};
  out.push_back(Persona{"P07",
                        {
                            at("05:00", early, "wake up"),
                            at("09:00", {3, 4, 5, 6}, "wake up"),
                            at("05:15", early, "make coffee"),
                            at("05:35", early, "go to work"),
                            at("12:45", late, "go to work"),
                            at("09:15", {3, 4, 5, 6}, "morning hygiene"),
                            at("10:00", {3}, "go shopping"),
                            at("10:00", {4}, "clean the house"),
                            at("10:00", {5}, "do laundry"),
                            at("10:00", {6}, "call family"),
                            at("14:00", early, "make lunch"),
                            at("12:00", {3, 4, 5, 6}, "make lunch"),
                            at("15:00", {0, 1, 2, 5, 6}, "read a novel"),
                            at("18:00", {0, 1, 2, 5, 6}, "make dinner"),
                            at("21:00", late, "make dinner"),
                            at("19:15", {0, 1, 2, 5, 6}, "wash dishes"),
                            at("22:15", late, "wash dishes"),
                            at("19:40", {0, 1, 2, 5, 6}, "watch tv"),
                            at("22:40", late, "watch tv"),
                            at("21:00", {0, 1, 2, 6}, "prepare for bed"),
                            at("22:50", {5}, "prepare for bed"),
                            sleep_at("21:10", {0, 1, 6}, "05:00"),
                            sleep_at("21:10", {2}, "09:00"),
                            sleep_at("00:10", {4, 5}, "09:00"),
                            sleep_at("23:00", {5}, "09:00"),
                        },
                        0.10,
                        12.0});

  out.push_back(Persona{"P08",
                        {
                            at("07:00", kDaily, "wake up"),
                            at("07:15", kDaily, "morning hygiene"),
                            at("07:40", kDaily, "make breakfast"),
                            at("08:05", kDaily, "make coffee"),
                            at("08:30", kWorkdays, "work from home"),
                            at("09:00", {5}, "clean the house"),
                            at("09:00", {6}, "go shopping"),
                            at("12:00", kDaily, "make lunch"),
                            at("13:00", kWorkdays, "work from home"),
                            at("13:00", kWeekend, "read a novel"),
                            at("16:40", {0, 2, 4}, "do laundry"),
                            at("17:00", kDaily, "have a snack"),
                            at("18:00", kDaily, "make dinner"),
                            at("19:10", kDaily, "wash dishes"),
                            at("19:30", kDaily, "watch tv"),
                            at("21:00", {1, 3, 5}, "call family"),
                            at("21:40", kDaily, "take a bath"),
                            at("22:20", kDaily, "prepare for bed"),
                            sleep_at("22:30", kDaily, "07:00"),
                        },
                        0.10,
                        5.0});
  return out;
}

Persona deterministic_persona() { return office_worker("Z01", 0.0, 0.0); }

}  // namespace lsti
