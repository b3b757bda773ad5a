# Dictionary examples from the lecture

# Count how often each letter occurs in a word
counts = {}
for letter in "mississippi":
    counts[letter] = counts.get(letter, 0) + 1
print(counts)

# Iterate over keys and values with items()
capitals = {"france": "paris", "italy": "rome"}
for country, city in capitals.items():
    print(country, "->", city)

# Check whether a key exists before reading it
if "spain" in capitals:
    print(capitals["spain"])
else:
    print("no entry for spain")
