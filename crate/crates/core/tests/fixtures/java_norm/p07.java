public class Box<T> {
    private T content;

    public void put(T item) {
        content = item;
    }

    public T take() {
        return content;
    }

    public boolean isEmpty() {
        return content == null;
    }
}
