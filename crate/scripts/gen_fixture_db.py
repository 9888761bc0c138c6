#!/usr/bin/env python3
"""Regenerate the fixture entity tables under crates/core/data/db.

The tables are small, deterministic stand-ins for the MultiWOZ databases.
A handful of records are pinned at fixed positions so that the golden
dialogue fixtures (museum/college attractions, moderate hotels) resolve
to stable entities.
"""
import json
import os
import random

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "data", "db")
AREAS = ["centre", "north", "south", "east", "west"]
rng = random.Random(20191217)

FIRST = ["ashley", "bridge", "carolina", "kings", "fen", "granta", "hamilton", "leverton",
         "lovell", "mill", "nirala", "oak", "pembroke", "queens", "riverside", "saint",
         "trinity", "varsity", "willow", "yew", "alder", "beech", "cedar", "elm", "heron",
         "kestrel", "linden", "maple", "orchard", "parkside", "rowan", "swan"]
SECOND = ["court", "house", "lodge", "place", "gardens", "yard", "view", "green", "hall", "row"]
STREETS = ["king street", "trumpington road", "regent street", "hills road", "mill road",
           "chesterton road", "newmarket road", "huntingdon road", "histon road", "station road",
           "jesus lane", "bridge street", "castle street", "market square", "milton road"]
used_names = set()


def name(suffix=""):
    while True:
        n = f"{rng.choice(FIRST)} {rng.choice(SECOND)}"
        if suffix:
            n = f"{n} {suffix}"
        if n not in used_names:
            used_names.add(n)
            return n


def phone():
    return "01223" + "".join(rng.choice("0123456789") for _ in range(6))


def postcode():
    return f"cb{rng.randint(1, 5)}{rng.randint(1, 9)}{rng.choice('abdefghjlnpqrstuwxyz')}{rng.choice('abdefghjlnpqrstuwxyz')}"


def address():
    return f"{rng.randint(1, 200)} {rng.choice(STREETS)}"


def attraction():
    recs = []
    used_names.update(["broughton house gallery", "christ's college", "cambridge botanic gardens"])
    recs.append({"name": "broughton house gallery", "type": "museum", "area": "centre",
                 "entrance fee": "free", "address": "98 king street", "postcode": "cb11ln",
                 "phone": "01223314960"})
    for _ in range(22):
        recs.append({"name": name("museum"), "type": "museum", "area": rng.choice(AREAS),
                     "entrance fee": rng.choice(["free", "free", "2 pounds", "5 pounds"]),
                     "address": address(), "postcode": postcode(), "phone": phone()})
    recs.append({"name": "christ's college", "type": "college", "area": "centre",
                 "entrance fee": "free", "address": "saint andrew's street",
                 "postcode": "cb23bu", "phone": "01223334900"})
    # christ's college stays the only college so a type=college query has one match
    for _ in range(9):
        recs.append({"name": name("sports centre"), "type": "multiple sports", "area": rng.choice(AREAS),
                     "entrance fee": rng.choice(["free", "free", "2 pounds"]),
                     "address": address(), "postcode": postcode(), "phone": phone()})
    recs.append({"name": "cambridge botanic gardens", "type": "park", "area": "centre",
                 "entrance fee": "4 pounds", "address": "bateman street", "postcode": "cb21jf",
                 "phone": "01223336265"})
    for typ, n in [("park", 4), ("theatre", 5), ("nightclub", 5), ("swimmingpool", 4),
                   ("boat", 4), ("cinema", 3), ("architecture", 5), ("entertainment", 4),
                   ("concerthall", 2)]:
        for _ in range(n):
            recs.append({"name": name(), "type": typ, "area": rng.choice(AREAS),
                         "entrance fee": rng.choice(["free", "3 pounds", "5 pounds", "1 pounds"]),
                         "address": address(), "postcode": postcode(), "phone": phone()})
    return recs


def hotel():
    recs = []
    used_names.add("a and b guest house")
    recs.append({"name": "a and b guest house", "type": "guesthouse", "area": "east",
                 "pricerange": "moderate", "stars": "4", "parking": "no", "internet": "yes",
                 "address": "124 tenison road", "postcode": "cb12dp", "phone": "01223315702"})
    specs = [("moderate", 17), ("cheap", 12), ("expensive", 9)]
    for price, n in specs:
        for _ in range(n):
            typ = rng.choice(["guesthouse", "guesthouse", "hotel"])
            recs.append({"name": name("hotel" if typ == "hotel" else "guest house"), "type": typ,
                         "area": rng.choice(AREAS), "pricerange": price,
                         "stars": rng.choice(["0", "2", "3", "4", "4"]),
                         "parking": rng.choice(["yes", "yes", "no"]),
                         "internet": rng.choice(["yes", "yes", "no"]),
                         "address": address(), "postcode": postcode(), "phone": phone()})
    return recs


def restaurant():
    foods = ["italian", "chinese", "indian", "british", "european", "french", "thai",
             "spanish", "mediterranean", "japanese", "korean", "turkish"]
    recs = []
    for _ in range(48):
        recs.append({"name": name(), "food": rng.choice(foods), "area": rng.choice(AREAS),
                     "pricerange": rng.choice(["cheap", "moderate", "expensive"]),
                     "address": address(), "postcode": postcode(), "phone": phone()})
    return recs


def train():
    places = ["cambridge", "london kings cross", "norwich", "ely", "stansted airport",
              "peterborough", "leicester", "birmingham new street"]
    days = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]
    recs = []
    n = 0
    for other in places[1:]:
        for day in days:
            for direction in (0, 1):
                dep, dest = ("cambridge", other) if direction == 0 else (other, "cambridge")
                for _ in range(2):
                    h = rng.randint(5, 21)
                    m = rng.choice([0, 11, 17, 24, 32, 40, 59])
                    dur = rng.choice([17, 28, 50, 79, 88, 105])
                    arr = h * 60 + m + dur
                    n += 1
                    recs.append({"trainID": f"tr{1000 + n * 7 % 9000:04d}", "departure": dep,
                                 "destination": dest, "day": day,
                                 "leaveAt": f"{h:02d}:{m:02d}",
                                 "arriveBy": f"{(arr // 60) % 24:02d}:{arr % 60:02d}",
                                 "price": f"{rng.choice([4.4, 10.1, 13.2, 17.6, 23.6])} pounds",
                                 "duration": f"{dur} minutes"})
    return recs


def taxi():
    colors = ["black", "white", "red", "yellow", "blue", "grey"]
    makes = ["ford", "toyota", "skoda", "bmw", "honda", "audi", "volvo", "tesla", "lexus", "volkswagen"]
    recs = [{"type": "ford", "color": "black", "phone": "83307313274"}]
    for _ in range(19):
        recs.append({"type": rng.choice(makes), "color": rng.choice(colors),
                     "phone": "0" + "".join(rng.choice("0123456789") for _ in range(10))})
    return recs


def police():
    return [{"name": "parkside police station", "address": "parkside, cambridge",
             "postcode": "cb11jg", "phone": "01223358966"}]


def hospital():
    deps = ["acute medical assessment unit", "cardiology", "neurology", "oncology",
            "paediatric clinic", "emergency department", "haematology", "urology",
            "infectious diseases", "transplant unit"]
    return [{"department": d, "phone": phone(), "address": "hills road, cambridge",
             "postcode": "cb20qq"} for d in deps]


def main():
    os.makedirs(OUT, exist_ok=True)
    for dom, fn in [("attraction", attraction), ("hotel", hotel), ("restaurant", restaurant),
                    ("train", train), ("taxi", taxi), ("police", police), ("hospital", hospital)]:
        with open(os.path.join(OUT, f"{dom}.json"), "w") as f:
            json.dump(fn(), f, indent=1)
            f.write("\n")


if __name__ == "__main__":
    main()
