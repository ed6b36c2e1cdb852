from .cli import app


def main():
    """
    Enclosure Lab -- numerical checks of the enclosure method for mixed cavities
    """

    app()


if __name__ == "__main__":
    main()
