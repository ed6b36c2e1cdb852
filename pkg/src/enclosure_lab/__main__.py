# __main__.py

from enclosure_lab import main

main()
