"""Seeded synthetic corpora standing in for the four crowd-sourced app datasets.

Each app has its own slot inventory and phrasing, but the apps share carrier
phrases, cities and date/number expressions, which gives a multi-task model
something to transfer. Open-class values (cities, streets, restaurant names,
amenities, promo codes, listing types) are built from morpheme families and
split into a small frequent pool and a large held-out pool that reuses the
same suffixes and prefixes with different stems. Held-out values are rare, so
at test time they are mostly out of vocabulary while still sharing character
structure with training values.

A share of the templates give no context at all ("how about X"), so the slot
type must be read off the value itself.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

import numpy as np

FULL_SIZES = {"United": 20697, "OpenTable": 3151, "Greyhound": 4951, "Airbnb": 4666}
DESK_SIZES = {"United": 2000, "OpenTable": 1000, "Greyhound": 1000, "Airbnb": 1000}
ANCHOR = "United"
APP_ORDER = ("United", "OpenTable", "Greyhound", "Airbnb")

_PLACEHOLDER = re.compile(r"\{([A-Za-z0-9_]+)\}")


class ConfigError(ValueError):
    pass


@dataclass
class ValuePool:
    train: list[str]
    heldout: list[str] = field(default_factory=list)


@dataclass
class AppSpec:
    name: str
    slots: list[str]
    values: dict[str, ValuePool]
    templates: list[str]
    max_slots: int = 1
    lowercase: bool = False
    families: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.templates:
            raise ConfigError(f"{self.name}: no templates")
        for tpl in self.templates:
            used = template_slots(tpl)
            if not used:
                raise ConfigError(f"{self.name}: template without slots: {tpl!r}")
            if len(used) > self.max_slots:
                raise ConfigError(f"{self.name}: {len(used)} slots in {tpl!r}")
            unknown = set(used) - set(self.slots)
            if unknown:
                raise ConfigError(f"{self.name}: template uses unknown slots {sorted(unknown)}")
        for slot in self.slots:
            pool = self.values.get(slot)
            if pool is None or not pool.train:
                raise ConfigError(f"{self.name}: empty lexicon for {slot}")
            overlap = set(pool.train) & set(pool.heldout)
            if overlap:
                raise ConfigError(f"{self.name}/{slot}: held-out overlaps train: {sorted(overlap)[:3]}")

    def templates_for(self, slot: str) -> list[str]:
        return [t for t in self.templates if slot in template_slots(t)]


def template_slots(template: str) -> list[str]:
    return _PLACEHOLDER.findall(template)


# ---------------------------------------------------------------- lexicons

STEMS = ["oak", "ash", "elm", "pine", "cedar", "birch", "maple", "willow", "stone", "rock",
         "river", "lake", "brook", "hill", "fox", "wolf", "bear", "hawk", "crow", "raven",
         "eagle", "deer", "iron", "copper", "silver", "gold", "amber", "rose", "lily", "sage",
         "mint", "clover", "fern", "moss", "reed", "sand", "salt", "frost", "snow", "storm",
         "sun", "moon", "star", "north", "south", "west", "east", "red", "blue", "green",
         "black", "white", "grey", "brown", "marsh", "meadow", "harbor", "cliff", "spring",
         "summer"]
TRAIN_STEMS, HELDOUT_STEMS = STEMS[::2], STEMS[1::2]

CITY_SUFFIXES = ["ville", "burg", "ton", "field", "port", "ford", "dale"]
STREET_PREFIXES = ["Bay", "Glen", "Fair", "Sea"]
STREET_SUFFIXES = ["side", "view", "wood", "shore", "crest", "mont", "haven", "ridge", "gate"]
EATERY_SUFFIXES = ["house", "grill", "tavern", "kitchen"]
LISTING_SUFFIXES = ["loft", "cabin", "lodge", "cottage"]
AMENITY_FRIENDLY = ["pet", "dog", "kid", "family", "cat", "bike", "baby", "wheelchair", "eco",
                    "budget"]
CODE_STEMS = ["SAVE", "BUS", "DEAL", "RIDE", "TRIP", "GO", "FARE", "ROAD", "TOUR", "HOP"]


def _cap(s: str) -> str:
    return s[:1].upper() + s[1:]


def _combos(stems, suffixes, fmt):
    return [fmt(st, su) for st, su in itertools.product(stems, suffixes)]


def _cities():
    train = [_cap(st) + CITY_SUFFIXES[i % len(CITY_SUFFIXES)] for i, st in enumerate(TRAIN_STEMS)]
    train += ["Boston", "Denver", "Burbank", "Chicago", "Seattle", "Houston", "Miami", "Portland",
              "San Diego", "St Petersburg", "New York", "Las Vegas"]
    held = _combos(HELDOUT_STEMS, CITY_SUFFIXES, lambda st, su: _cap(st) + su)
    return ValuePool(train, held)


def _streets():
    train = [p + s for p in STREET_PREFIXES[:2] for s in STREET_SUFFIXES[:5]]
    train += ["Castro Street", "Market Street", "Main Street", "Union Square", "Mission District"]
    held = [p + s for p in STREET_PREFIXES for s in STREET_SUFFIXES if p + s not in train]
    held += [p + s + " Street" for p in STREET_PREFIXES for s in STREET_SUFFIXES]
    held += [_cap(st) + " Avenue" for st in HELDOUT_STEMS]
    return ValuePool(train, held)


def _eateries():
    train = ["Smokehouse", "Steakhouse", "Alehouse"]
    train += [_cap(st) + EATERY_SUFFIXES[i % len(EATERY_SUFFIXES)] for i, st in enumerate(TRAIN_STEMS[:16])]
    held = ["Roadhouse", "Chophouse", "Fishhouse", "Oysterhouse", "Brewhouse"]
    held += _combos(HELDOUT_STEMS, EATERY_SUFFIXES, lambda st, su: _cap(st) + su)
    return ValuePool(train, held)


def _listings():
    train = ["apartment", "house", "condo", "studio", "villa"]
    train += [st + LISTING_SUFFIXES[i % len(LISTING_SUFFIXES)] for i, st in enumerate(TRAIN_STEMS[:8])]
    held = _combos(HELDOUT_STEMS, LISTING_SUFFIXES, lambda st, su: st + su)
    return ValuePool(train, held)


def _amenities():
    train = [f"{a}-friendly" for a in AMENITY_FRIENDLY[:4]]
    train += ["a gym", "parking", "a pool", "wifi", "a hot tub", "a fire extinguisher", "a fireplace",
              "a washer", "air conditioning"]
    held = [f"{a}-friendly" for a in AMENITY_FRIENDLY[4:]]
    held += [f"{st}-friendly" for st in HELDOUT_STEMS]
    held += [f"a {st}room" for st in HELDOUT_STEMS[:12]]
    return ValuePool(train, held)


def _codes():
    train = [f"{c}{n}" for c in CODE_STEMS[:3] for n in (10, 15, 20, 25)]
    held = [f"{c}{n}" for c in CODE_STEMS[3:] for n in (5, 10, 15, 20, 25, 30, 35, 40, 50)]
    held += [f"{st.upper()}{n}" for st in HELDOUT_STEMS[:10] for n in (10, 20)]
    return ValuePool(train, held)


MONTHS = ["Jan", "Feb", "March", "April", "May", "June", "July", "Aug", "Sept", "Oct", "Nov", "Dec"]
DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]


def _dates():
    train = [f"{m} {d}" for m in MONTHS for d in (1, 5, 11, 18, 24, 30)]
    train += [f"next {d}" for d in DAYS] + [f"this {d}" for d in DAYS] + ["tomorrow", "today"]
    train += [f"{m} {d}th" for m in MONTHS[:6] for d in (4, 9, 14)]
    return ValuePool(train)


def _times():
    train = [f"{h} pm" for h in range(1, 12)] + [f"{h} am" for h in range(6, 12)]
    train += [f"{h}:30" for h in range(5, 10)] + ["noon", "midnight", "the evening", "the morning"]
    return ValuePool(train)


NUMBER_WORDS = ["two", "three", "four", "five", "six"]


def _counts():
    return ValuePool([str(n) for n in range(1, 9)] + NUMBER_WORDS)


def _prices():
    train = [f"${n}" for n in (60, 80, 95, 120, 150, 200, 250)]
    train += [f"${n} per week" for n in (700, 900, 1300)] + [f"${n} a night" for n in (75, 110, 180)]
    return ValuePool(train)


def _fixed(*vals):
    return ValuePool(list(vals))


# ---------------------------------------------------------------- apps

OPENERS = ["", "", "", "hey ", "ok so ", "so ", "well ", "alright ", "hmm "]
CLOSERS = ["", "", "", " please", " thanks", " .", " !", " ok ?", " if possible"]
BARE = ["how about {X}", "what about {X}", "{X} sounds good", "i was thinking {X}", "maybe {X}",
        "{X} works for me", "let's go with {X}", "{X} is fine", "i'd like {X}", "{X}"]


def _bare(slot):
    return [b.replace("X", slot) for b in BARE]


def united_app() -> AppSpec:
    cities, dates = _cities(), _dates()
    values = {
        "FromLoc": cities, "ToLoc": cities, "FromLoc2": cities, "ToLoc2": cities,
        "DepartDate": dates, "ReturnDate": dates, "DepartDate2": dates, "ReturnDate2": dates,
        "NumTickets": _counts(),
        "Nonstop": _fixed("nonstop", "direct", "non-stop", "no layovers"),
        "Class": _fixed("economy", "business", "first class", "premium economy", "basic economy"),
        "TripType": _fixed("round trip", "one way", "multi-hop", "roundtrip", "multi city"),
    }
    t = [
        "please book flight from {FromLoc} to {ToLoc}",
        "book a flight from {FromLoc} to {ToLoc} on {DepartDate}",
        "fly from {FromLoc} to {ToLoc} leaving {DepartDate} returning {ReturnDate}",
        "i need {NumTickets} tickets from {FromLoc} to {ToLoc}",
        "get me a {Class} seat to {ToLoc}",
        "find a {Nonstop} flight to {ToLoc} on {DepartDate}",
        "book a {TripType} ticket from {FromLoc} to {ToLoc}",
        "departing {DepartDate} from {FromLoc}",
        "flying out of {FromLoc} on {DepartDate}",
        "return flight on {ReturnDate}",
        "coming back {ReturnDate}",
        "leave {DepartDate} and come back {ReturnDate}",
        "search {Nonstop} flights from {FromLoc} to {ToLoc} in {Class}",
        "{NumTickets} {Class} tickets to {ToLoc} on {DepartDate}",
        "book {NumTickets} seats on a {TripType} flight to {ToLoc}",
        "from {FromLoc} to {ToLoc} then from {FromLoc2} to {ToLoc2}",
        "a {TripType} flight to {ToLoc} and then {FromLoc2} to {ToLoc2}",
        "second leg from {FromLoc2} to {ToLoc2} leaving {DepartDate2}",
        "second flight returns {ReturnDate2}",
        "i want to go to {ToLoc}",
        "i'm leaving from {FromLoc}",
        "destination is {ToLoc}",
        "make it {Nonstop}",
        "{Class} please",
        "make it a {TripType}",
        "for {NumTickets} people",
        "show flights to {ToLoc} on {DepartDate} for {NumTickets} passengers",
        "i need to be in {ToLoc} by {DepartDate}",
        "book {TripType} from {FromLoc} to {ToLoc} leaving {DepartDate}",
    ]
    return AppSpec("United", list(values), values, t, max_slots=4, lowercase=True,
                   families={"city": CITY_SUFFIXES})


def opentable_app() -> AppSpec:
    values = {
        "Cuisine": ValuePool(["Thai", "Italian", "Mexican", "Chinese", "Indian", "French", "Japanese",
                              "Greek", "Korean", "sushi", "BBQ", "pizza"],
                             ["Peruvian", "Lebanese", "Ethiopian", "Vietnamese"]),
        "Date": _dates(),
        "Time": _times(),
        "Loc": _streets(),
        "NumPeople": _counts(),
        "RestaurantName": _eateries(),
    }
    t = [
        "let's do something on {Loc}",
        "somewhere near {Loc}",
        "we could eat around {Loc}",
        "is there anything good in {Loc}",
        "i'm in the mood for {Cuisine} food",
        "do you want {Cuisine} tonight",
        "we should get {Cuisine}",
        "let's have dinner at {RestaurantName}",
        "can we book a table at {RestaurantName}",
        "i heard {RestaurantName} is great",
        "we should eat on {Date}",
        "are you free {Date}",
        "let's make it {Date}",
        "how about dinner at {Time}",
        "can we meet at {Time}",
        "book it for {Time}",
        "a table for {NumPeople}",
        "there will be {NumPeople} of us",
        "reserve for {NumPeople} people",
        *_bare("Cuisine"), *_bare("RestaurantName"), *_bare("Loc"),
    ]
    return AppSpec("OpenTable", list(values), values, t,
                   families={"eatery": EATERY_SUFFIXES, "street": STREET_PREFIXES + STREET_SUFFIXES})


def greyhound_app() -> AppSpec:
    cities, dates, times, counts = _cities(), _dates(), _times(), _counts()
    values = {
        "DepartDate": dates, "DepartTime": times, "ReturnDate": dates, "ReturnTime": times,
        "LeavingFrom": cities, "GoingTo": cities,
        "NumChildren": counts, "NumAdults": counts, "NumSeniors": counts,
        "PromoCode": _codes(),
        "DiscountType": _fixed("student", "military", "veteran"),
        "OneWay": _fixed("one way", "one-way", "no return"),
        "Wheelchair": _fixed("wheelchair", "a wheelchair space", "wheelchair access"),
    }
    t = [
        "we should leave on {DepartDate}",
        "let's head out {DepartDate}",
        "the bus leaves at {DepartTime}",
        "we could catch the {DepartTime} bus",
        "we should return on {ReturnDate}",
        "let's come back {ReturnDate}",
        "the return bus at {ReturnTime}",
        "we head home at {ReturnTime}",
        "we're leaving from {LeavingFrom}",
        "we'd start in {LeavingFrom}",
        "the bus from {LeavingFrom}",
        "we're going to {GoingTo}",
        "let's take the bus to {GoingTo}",
        "we need to get to {GoingTo}",
        "bring the {NumChildren} kids",
        "there are {NumChildren} children coming",
        "{NumAdults} adults are going",
        "tickets for {NumAdults} adults",
        "{NumSeniors} seniors are coming too",
        "grandma makes {NumSeniors} seniors",
        "use the code {PromoCode}",
        "i have promo code {PromoCode}",
        "we get the {DiscountType} discount",
        "don't forget the {DiscountType} rate",
        "just {OneWay} this time",
        "we only need {OneWay} tickets",
        "we need {Wheelchair} on the bus",
        "make sure there is {Wheelchair}",
        *_bare("PromoCode"), *_bare("DiscountType"),
    ]
    return AppSpec("Greyhound", list(values), values, t,
                   families={"city": CITY_SUFFIXES, "code": CODE_STEMS})


def airbnb_app() -> AppSpec:
    dates, counts, prices = _dates(), _counts(), _prices()
    values = {
        "NumPeople": counts,
        "RoomType": _fixed("private room", "entire place", "shared room", "whole home"),
        "Amenities": _amenities(),
        "StartDate": dates, "EndDate": dates,
        "DateRange": _fixed("a week", "the weekend", "two weeks", "a month", "3 nights", "5 nights",
                            "a few days"),
        "Location": ValuePool(_streets().train + _cities().train, _streets().heldout + _cities().heldout),
        "ListingType": _listings(),
        "Price": prices, "PriceLower": prices, "PriceUpper": prices,
    }
    t = [
        "it's for {NumPeople} people",
        "we need room for {NumPeople} guests",
        "we want a {RoomType}",
        "a {RoomType} would be fine",
        "it should have {Amenities}",
        "make sure it has {Amenities}",
        "we arrive {StartDate}",
        "check in on {StartDate}",
        "we leave {EndDate}",
        "check out on {EndDate}",
        "we're staying {DateRange}",
        "just for {DateRange}",
        "somewhere in {Location}",
        "let's stay near {Location}",
        "how about renting a {ListingType}",
        "we should get a {ListingType}",
        "around {Price} is good",
        "the budget is {Price}",
        "at least {PriceLower}",
        "nothing cheaper than {PriceLower}",
        "I want to keep the price below {PriceUpper}",
        "no more than {PriceUpper}",
        *_bare("Amenities"), *_bare("Location"), *_bare("ListingType"),
    ]
    return AppSpec("Airbnb", list(values), values, t,
                   families={"listing": LISTING_SUFFIXES, "amenity": ["-friendly", "room"],
                             "street": STREET_PREFIXES + STREET_SUFFIXES, "city": CITY_SUFFIXES})


def default_suite() -> dict[str, AppSpec]:
    apps = [united_app(), opentable_app(), greyhound_app(), airbnb_app()]
    return {a.name: a for a in apps}


# ---------------------------------------------------------------- generation

def generate_synthetic(spec: AppSpec, n: int, seed: int, heldout_frac: float = 0.2,
                       widen_named: bool = False) -> list[str]:
    """``n`` markup lines for one app, deterministic in ``seed``.

    Each slot value comes from the held-out pool with probability
    ``heldout_frac`` (when the pool has one). ``widen_named`` draws named-entity
    slots uniformly from the union of both pools, spreading over-represented
    values out.
    """
    if n < 1:
        raise ConfigError("need n >= 1")
    rng = np.random.default_rng(seed)
    if spec.max_slots == 1:
        # balance slot types first, then phrasing
        by_slot = {s: spec.templates_for(s) for s in spec.slots}
        by_slot = {s: ts for s, ts in by_slot.items() if ts}
        if not by_slot:
            raise ConfigError(f"{spec.name}: no templates")
        slot_names = list(by_slot)
    lines = []
    for _ in range(n):
        if spec.max_slots == 1:
            slot = slot_names[rng.integers(len(slot_names))]
            tpl = by_slot[slot][rng.integers(len(by_slot[slot]))]
        else:
            tpl = spec.templates[rng.integers(len(spec.templates))]
        opener = OPENERS[rng.integers(len(OPENERS))]
        closer = CLOSERS[rng.integers(len(CLOSERS))]

        def fill(m):
            slot = m.group(1)
            pool = spec.values[slot]
            if widen_named and pool.heldout:
                choices = pool.train + pool.heldout
            elif pool.heldout and rng.random() < heldout_frac:
                choices = pool.heldout
            else:
                choices = pool.train
            value = choices[rng.integers(len(choices))]
            if spec.lowercase:
                value = value.lower()
            return f"<{slot}> {value} </{slot}>"

        text = opener + tpl + closer
        if spec.lowercase:
            text = text.lower()
            # restore slot names inside placeholders
            text = _PLACEHOLDER.sub(lambda m: "{" + _match_slot(spec, m.group(1)) + "}", text)
        lines.append(_PLACEHOLDER.sub(fill, text))
    return lines


def _match_slot(spec: AppSpec, lowered: str) -> str:
    for s in spec.slots:
        if s.lower() == lowered:
            return s
    raise ConfigError(f"{spec.name}: unknown slot {lowered}")
