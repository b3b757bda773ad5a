# Loop examples from the lecture

# Sum the numbers from 1 to 10 with a for loop and range
total = 0
for number in range(1, 11):
    total += number
print("sum:", total)

# Iterate over a list with the index using enumerate
fruits = ["apple", "banana", "cherry"]
for index, fruit in enumerate(fruits):
    print(index, fruit)

# A while loop that halves a value until it drops below one
value = 100.0
steps = 0
while value >= 1:
    value = value / 2
    steps += 1
print("halving steps:", steps)

# Stop a loop early with break
for fruit in fruits:
    if fruit.startswith("b"):
        print("first fruit starting with b:", fruit)
        break
