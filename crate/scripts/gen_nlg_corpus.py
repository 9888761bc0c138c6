"""Writes the bundled system-side NLG corpus (action, utterance) pairs."""
import json

E = []


def add(text, *items):
    action = {}
    for label, slot, value in items:
        action.setdefault(label, []).append([slot, value])
    E.append({"action": action, "text": text})


# multi-slot informs
add("the attraction phone number is 01223336265 . and its postcode is cb21jf .",
    ("Attraction-Inform", "Phone", "01223336265"), ("Attraction-Inform", "Post", "cb21jf"))
add("the attraction phone number is 01223314960 . and its postcode is cb11ln .",
    ("Attraction-Inform", "Phone", "01223314960"), ("Attraction-Inform", "Post", "cb11ln"))
add("it 's located at 98 king street . their entrance fee is free .",
    ("Attraction-Inform", "Addr", "98 king street"), ("Attraction-Inform", "Fee", "free"))
add("the attraction is located at 98 king street and the entrance fee is free .",
    ("Attraction-Inform", "Addr", "98 king street"), ("Attraction-Inform", "Fee", "free"))
add("the attraction is located at trinity street and the entrance fee is 2 pounds .",
    ("Attraction-Inform", "Addr", "trinity street"), ("Attraction-Inform", "Fee", "2 pounds"))
add("the attraction is at 98 king street , postcode cb11ln .",
    ("Attraction-Inform", "Addr", "98 king street"), ("Attraction-Inform", "Post", "cb11ln"))
add("the attraction is at 98 king street , postcode cb11ln , and the phone number is 01223314960 .",
    ("Attraction-Inform", "Addr", "98 king street"), ("Attraction-Inform", "Post", "cb11ln"),
    ("Attraction-Inform", "Phone", "01223314960"))
add("the hotel address is 124 tenison road and the postcode is cb12dp .",
    ("Hotel-Inform", "Addr", "124 tenison road"), ("Hotel-Inform", "Post", "cb12dp"))
add("the hotel address is 56 saint barnabas road and the postcode is cb12de .",
    ("Hotel-Inform", "Addr", "56 saint barnabas road"), ("Hotel-Inform", "Post", "cb12de"))
add("the address is 124 tenison road . the postal code for that hotel is cb12dp .",
    ("Hotel-Inform", "Addr", "124 tenison road"), ("Hotel-Inform", "Post", "cb12dp"))
add("the hotel phone number is 01223315702 and the postcode is cb12dp .",
    ("Hotel-Inform", "Phone", "01223315702"), ("Hotel-Inform", "Post", "cb12dp"))
add("the hotel is at 124 tenison road , cb12dp , phone 01223315702 .",
    ("Hotel-Inform", "Addr", "124 tenison road"), ("Hotel-Inform", "Post", "cb12dp"),
    ("Hotel-Inform", "Phone", "01223315702"))
add("the hotel has 4 stars and is in the east .",
    ("Hotel-Inform", "Stars", "4"), ("Hotel-Inform", "Area", "east"))
add("yes , the hotel has free parking and free wifi .",
    ("Hotel-Inform", "Parking", "free"), ("Hotel-Inform", "Internet", "free"))
add("the hotel is a guesthouse in the moderate price range .",
    ("Hotel-Inform", "Type", "guesthouse"), ("Hotel-Inform", "Price", "moderate"))
add("the restaurant is at 168 milton road , postcode cb54rw .",
    ("Restaurant-Inform", "Addr", "168 milton road"), ("Restaurant-Inform", "Post", "cb54rw"))
add("the train leaves at 17:59 and arrives by 18:27 .",
    ("Train-Inform", "Leave", "17:59"), ("Train-Inform", "Arrive", "18:27"))
add("the ticket price is 4.4 pounds and the travel time is 28 minutes .",
    ("Train-Inform", "Ticket", "4.4 pounds"), ("Train-Inform", "Time", "28 minutes"))

# choice + recommend
for n, name in [("23", "broughton house gallery"), ("5", "cambridge contemporary art"), ("3", "all saints church")]:
    add(f"there are {n} attractions like that . you would love {name} .",
        ("Attraction-Inform", "Choice", n), ("Attraction-Recommend", "Name", name))
add("we have 23 of those ! anything specific you need or just a recommendation ? you would love broughton house gallery .",
    ("Attraction-Inform", "Choice", "23"), ("Attraction-Recommend", "Name", "broughton house gallery"))
for n, name in [("18", "a and b guest house"), ("7", "acorn guest house"), ("2", "the lensfield hotel")]:
    add(f"there are {n} hotels like that . i would suggest the hotel {name} .",
        ("Hotel-Inform", "Choice", n), ("Hotel-Recommend", "Name", name))
add("there are 18 of those . yes , i would suggest a and b guest house .",
    ("Hotel-Inform", "Choice", "18"), ("Hotel-Recommend", "Name", "a and b guest house"))
for n, name in [("12", "kings place"), ("4", "the golden curry")]:
    add(f"there are {n} restaurants that match . i recommend {name} .",
        ("Restaurant-Inform", "Choice", n), ("Restaurant-Recommend", "Name", name))
add("i found 14 trains . tr1007 would work for you .",
    ("Train-Inform", "Choice", "14"), ("Train-Recommend", "Id", "tr1007"))

# single recommendations
add("how about the attraction christ's college ?", ("Attraction-Recommend", "Name", "christ's college"))
add("how about the attraction kettle's yard ?", ("Attraction-Recommend", "Name", "kettle's yard"))
add("i can recommend the hotel a and b guest house .", ("Hotel-Recommend", "Name", "a and b guest house"))
add("i can recommend the hotel acorn guest house .", ("Hotel-Recommend", "Name", "acorn guest house"))

# bookings
add("i have booked your hotel room at a and b guest house . your reference number is 7GAWK763 .",
    ("Hotel-Book", "Name", "a and b guest house"), ("Hotel-Book", "Ref", "7GAWK763"))
add("i have booked your hotel room at acorn guest house . your reference number is QH3XD2AK .",
    ("Hotel-Book", "Name", "acorn guest house"), ("Hotel-Book", "Ref", "QH3XD2AK"))
add("your table at kings place is booked , reference 1ZR8SQ5Z .",
    ("Restaurant-Book", "Name", "kings place"), ("Restaurant-Book", "Ref", "1ZR8SQ5Z"))
add("i booked train tr1007 for you . the reference number is 4YBVZ9KQ .",
    ("Train-Book", "Id", "tr1007"), ("Train-Book", "Ref", "4YBVZ9KQ"))

# taxi
add("i have booked your taxi . be expecting a ford . their phone number is 83307313274 .",
    ("Taxi-Inform", "Car", "ford"), ("Taxi-Inform", "Phone", "83307313274"))
add("your taxi is booked . it is a black ford and the contact number is 83307313274 .",
    ("Taxi-Inform", "Car", "ford"), ("Taxi-Inform", "Phone", "83307313274"))
add("i have booked your taxi . be expecting a toyota . their phone number is 07218068540 .",
    ("Taxi-Inform", "Car", "toyota"), ("Taxi-Inform", "Phone", "07218068540"))

# requests for booking details
add("how many nights will you be staying at the hotel ?", ("Hotel-Request", "Stay", "?"))
add("how many people will be staying at the hotel ?", ("Hotel-Request", "People", "?"))
add("what day would you like to check in to the hotel ?", ("Hotel-Request", "Day", "?"))
add("how many people and how many nights should i book the hotel for ?",
    ("Hotel-Request", "People", "?"), ("Hotel-Request", "Stay", "?"))
add("how many people is the restaurant booking for ?", ("Restaurant-Request", "People", "?"))
add("how many train tickets do you need ?", ("Train-Request", "People", "?"))

# no offer
add("sorry , there is no attraction with type volcano .", ("Attraction-NoOffer", "Type", "volcano"))
add("i am sorry , i have no hotel in the north with 5 stars .",
    ("Hotel-NoOffer", "Area", "north"), ("Hotel-NoOffer", "Stars", "5"))

# general
add("you are welcome . have a great day !", ("general-welcome", "none", "none"))
add("you are welcome .", ("general-welcome", "none", "none"))
add("is there anything else i can help you with ?", ("general-reqmore", "none", "none"))
add("thank you for using our service . goodbye .", ("general-bye", "none", "none"))

with open("crates/core/data/nlg_corpus.jsonl", "w") as f:
    for e in E:
        f.write(json.dumps(e) + "\n")
print(len(E))
