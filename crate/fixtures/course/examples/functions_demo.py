# Function examples from the lecture

def area(width, height=1):
    """Return the area of a rectangle."""
    return width * height


def min_max(values):
    """Return the smallest and the largest value as a tuple."""
    return min(values), max(values)


def factorial(n):
    """Compute n! recursively."""
    if n == 0:
        return 1
    return n * factorial(n - 1)


print(area(3, 4), area(5))
low, high = min_max([4, 8, 1])
print(low, high, factorial(5))
